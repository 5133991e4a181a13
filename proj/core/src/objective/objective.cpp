#include "a2net/objective/objective.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "a2net/diffcore/ops.hpp"
#include "a2net/errors.hpp"

namespace a2net::objective {

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::mse: return "mse";
    case LossMode::ssim: return "ssim";
    case LossMode::mse_ssim: return "mse+ssim";
  }
  return "?";
}

LossMode parse_loss_mode(std::string_view name) {
  for (LossMode m : {LossMode::mse, LossMode::ssim, LossMode::mse_ssim}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown loss_mode '" + std::string(name) +
                    "' (expected mse, ssim or mse+ssim)");
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
}

namespace {

constexpr std::size_t kRadius = kSsimWindow / 2;

const std::array<double, kSsimWindow>& gaussian() {
  static const std::array<double, kSsimWindow> w = [] {
    std::array<double, kSsimWindow> g{};
    double total = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
      const double d = static_cast<double>(i) - static_cast<double>(kRadius);
      g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
      total += g[i];
    }
    for (auto& v : g) v /= total;
    return g;
  }();
  return w;
}

// Separable Gaussian filter keeping only windows fully inside the image.
class ValidFilter {
 public:
  ValidFilter(std::size_t height, std::size_t width)
      : h_(height), w_(width), oh_(height - kSsimWindow + 1), ow_(width - kSsimWindow + 1),
        tmp_(height * ow_) {}

  std::size_t out_size() const { return oh_ * ow_; }

  void apply(const double* in, double* out) {
    const auto& g = gaussian();
    for (std::size_t y = 0; y < h_; ++y) {
      for (std::size_t x = 0; x < ow_; ++x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < kSsimWindow; ++j) acc += g[j] * in[y * w_ + x + j];
        tmp_[y * ow_ + x] = acc;
      }
    }
    for (std::size_t y = 0; y < oh_; ++y) {
      for (std::size_t x = 0; x < ow_; ++x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < kSsimWindow; ++i) acc += g[i] * tmp_[(y + i) * ow_ + x];
        out[y * ow_ + x] = acc;
      }
    }
  }

  // out += adjoint(in); in has out_size() values, out has height*width.
  void adjoint(const double* in, double* out) {
    const auto& g = gaussian();
    std::fill(tmp_.begin(), tmp_.end(), 0.0);
    for (std::size_t y = 0; y < oh_; ++y) {
      for (std::size_t i = 0; i < kSsimWindow; ++i) {
        for (std::size_t x = 0; x < ow_; ++x) tmp_[(y + i) * ow_ + x] += g[i] * in[y * ow_ + x];
      }
    }
    for (std::size_t y = 0; y < h_; ++y) {
      for (std::size_t x = 0; x < ow_; ++x) {
        const double v = tmp_[y * ow_ + x];
        for (std::size_t j = 0; j < kSsimWindow; ++j) out[y * w_ + x + j] += g[j] * v;
      }
    }
  }

 private:
  std::size_t h_, w_, oh_, ow_;
  std::vector<double> tmp_;
};

// Mean SSIM of one plane. When dx/dy are given, adds d(upstream * mean)/dx
// and /dy into them.
double plane_ssim(const double* x, const double* y, std::size_t h, std::size_t w,
                  double upstream = 0.0, double* dx = nullptr, double* dy = nullptr) {
  ValidFilter f(h, w);
  const std::size_t n = h * w, m = f.out_size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> mx(m), my(m), exx(m), eyy(m), exy(m);
  f.apply(x, mx.data());
  f.apply(y, my.data());
  f.apply(xx.data(), exx.data());
  f.apply(yy.data(), eyy.data());
  f.apply(xy.data(), exy.data());

  const bool grad = dx != nullptr || dy != nullptr;
  std::vector<double> gmx, gmy, gxx, gyy, gxy;
  if (grad) {
    gmx.resize(m);
    gmy.resize(m);
    gxx.resize(m);
    gyy.resize(m);
    gxy.resize(m);
  }
  const double per = upstream / static_cast<double>(m);
  double total = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    const double ux = mx[p], uy = my[p];
    const double vx = exx[p] - ux * ux, vy = eyy[p] - uy * uy, cxy = exy[p] - ux * uy;
    const double a1 = 2.0 * ux * uy + kSsimC1, a2 = 2.0 * cxy + kSsimC2;
    const double b1 = ux * ux + uy * uy + kSsimC1, b2 = vx + vy + kSsimC2;
    const double s = (a1 * a2) / (b1 * b2);
    total += s;
    if (grad) {
      // Grouped so that identical inputs give exactly zero gradient.
      const double gs = per * s;
      const double da = 1.0 / a1 - 1.0 / a2, db = 1.0 / b2 - 1.0 / b1;
      gmx[p] = 2.0 * gs * (uy * da + ux * db);
      gmy[p] = 2.0 * gs * (ux * da + uy * db);
      gxx[p] = -gs / b2;
      gyy[p] = -gs / b2;
      gxy[p] = gs * 2.0 / a2;
    }
  }
  if (grad) {
    std::vector<double> amx(n, 0.0), amy(n, 0.0), axx(n, 0.0), ayy(n, 0.0), axy(n, 0.0);
    f.adjoint(gxy.data(), axy.data());
    if (dx != nullptr) {
      f.adjoint(gmx.data(), amx.data());
      f.adjoint(gxx.data(), axx.data());
      for (std::size_t i = 0; i < n; ++i) dx[i] += amx[i] + 2.0 * x[i] * axx[i] + y[i] * axy[i];
    }
    if (dy != nullptr) {
      f.adjoint(gmy.data(), amy.data());
      f.adjoint(gyy.data(), ayy.data());
      for (std::size_t i = 0; i < n; ++i) dy[i] += amy[i] + 2.0 * y[i] * ayy[i] + x[i] * axy[i];
    }
  }
  return total / static_cast<double>(m);
}

void require_ssim_extent(std::size_t h, std::size_t w, const char* op) {
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError(std::string(op) + ": extent " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the " + std::to_string(kSsimWindow) + "x" +
                     std::to_string(kSsimWindow) + " window");
  }
}

template <typename T>
void require_same(const diff::Tensor<T>& a, const diff::Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

}  // namespace

template <typename T>
diff::Tensor<T> mse_loss(const diff::Tensor<T>& a, const diff::Tensor<T>& b) {
  require_same(a, b, "mse_loss");
  const auto d = diff::sub(a, b);
  return diff::mean(diff::mul(d, d));
}

template <typename T>
diff::Tensor<T> ssim_loss(const diff::Tensor<T>& a, const diff::Tensor<T>& b) {
  require_same(a, b, "ssim_loss");
  const diff::Shape s = a.shape();
  require_ssim_extent(s.h, s.w, "ssim_loss");
  const std::size_t planes = s.n * s.c, n = s.plane();

  std::vector<double> x(n), y(n);
  double total = 0.0;
  for (std::size_t k = 0; k < planes; ++k) {
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(k * n), n, x.begin());
    std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(k * n), n, y.begin());
    total += plane_ssim(x.data(), y.data(), s.h, s.w);
  }
  const double value = 1.0 - total / static_cast<double>(planes);

  const diff::Tensor<T> inputs[] = {a, b};
  return diff::Tensor<T>::make_result(
      diff::Shape{1, 1, 1, 1}, {static_cast<T>(value)}, inputs,
      [a, b, s, planes, n](const diff::detail::Node<T>& self) {
        // d(1 - mean)/dS = -1 / planes for each plane's mean.
        const double upstream = -static_cast<double>(self.grad[0]) / static_cast<double>(planes);
        std::vector<double> x(n), y(n), dx(n), dy(n);
        for (std::size_t k = 0; k < planes; ++k) {
          std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(k * n), n, x.begin());
          std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(k * n), n, y.begin());
          std::fill(dx.begin(), dx.end(), 0.0);
          std::fill(dy.begin(), dy.end(), 0.0);
          plane_ssim(x.data(), y.data(), s.h, s.w, upstream, a.requires_grad() ? dx.data() : nullptr,
                     b.requires_grad() ? dy.data() : nullptr);
          if (a.requires_grad()) {
            T* g = a.node()->grad_buffer().data() + k * n;
            for (std::size_t i = 0; i < n; ++i) g[i] += static_cast<T>(dx[i]);
          }
          if (b.requires_grad()) {
            T* g = b.node()->grad_buffer().data() + k * n;
            for (std::size_t i = 0; i < n; ++i) g[i] += static_cast<T>(dy[i]);
          }
        }
      });
}

namespace {

template <typename T>
ComponentLoss<T> component(const diff::Tensor<T>& mse_a, const diff::Tensor<T>& mse_b,
                           const diff::Tensor<T>& ssim_a, const diff::Tensor<T>& ssim_b,
                           LossMode mode) {
  ComponentLoss<T> out;
  diff::Tensor<T> mse, ssim;
  if (mode != LossMode::ssim) {
    mse = mse_loss(mse_a, mse_b);
    out.mse = static_cast<double>(mse.item());
  }
  if (mode != LossMode::mse) {
    ssim = ssim_loss(ssim_a, ssim_b);
    out.ssim = static_cast<double>(ssim.item());
  }
  switch (mode) {
    case LossMode::mse: out.value = mse; break;
    case LossMode::ssim: out.value = ssim; break;
    case LossMode::mse_ssim: out.value = diff::add(mse, ssim); break;
  }
  return out;
}

}  // namespace

template <typename T>
ComponentLoss<T> loss_y(const diff::Tensor<T>& predicted, const diff::Tensor<T>& truth,
                        LossMode mode) {
  require_same(predicted, truth, "loss_y");
  return component(predicted, truth, predicted, truth, mode);
}

template <typename T>
ComponentLoss<T> loss_uv(const diff::Tensor<T>& predicted, const diff::Tensor<T>& truth,
                         LossMode mode) {
  require_same(predicted, truth, "loss_uv");
  if (mode == LossMode::mse) return component(predicted, truth, predicted, truth, mode);
  const auto shifted_p = diff::add_scalar(predicted, T(0.5));
  const auto shifted_t = diff::add_scalar(truth, T(0.5));
  return component(predicted, truth, shifted_p, shifted_t, mode);
}

template <typename T>
ComponentLoss<T> loss_image(const diff::Tensor<T>& predicted, const diff::Tensor<T>& truth,
                            color::Space space, LossMode mode) {
  require_same(predicted, truth, "loss_image");
  if (space == color::Space::rgb || mode == LossMode::mse) {
    return component(predicted, truth, predicted, truth, mode);
  }
  const auto shift = [](const diff::Tensor<T>& t) {
    const diff::Tensor<T> parts[] = {diff::slice_channels(t, 0, 1),
                                     diff::add_scalar(diff::slice_channels(t, 1, 2), T(0.5))};
    return diff::concat_channels<T>(parts);
  };
  return component(predicted, truth, shift(predicted), shift(truth), mode);
}

template <typename T>
std::pair<diff::Tensor<T>, LossReport> total_loss(const ComponentLoss<T>& y,
                                                  const ComponentLoss<T>& uv,
                                                  const LossWeights& weights) {
  weights.validate();
  LossReport r;
  r.alpha = weights.alpha;
  r.mse_y = y.mse;
  r.ssim_y = y.ssim;
  r.l_y = static_cast<double>(y.value.item());
  r.mse_uv = uv.mse;
  r.ssim_uv = uv.ssim;
  r.l_uv = uv.value.defined() ? static_cast<double>(uv.value.item()) : 0.0;
  r.l_total = r.l_y + weights.alpha * r.l_uv;
  diff::Tensor<T> total =
      uv.value.defined() ? diff::add(y.value, diff::scale(uv.value, static_cast<T>(weights.alpha)))
                         : y.value;
  return {total, r};
}

double ssim_plane(std::span<const float> a, std::span<const float> b, std::size_t height,
                  std::size_t width) {
  require_ssim_extent(height, width, "ssim");
  const std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  return plane_ssim(x.data(), y.data(), height, width);
}

double psnr(const color::RgbImage& a, const color::RgbImage& b) {
  if (!a.same_extents(b)) throw ShapeError("psnr: extent mismatch");
  double acc = 0.0;
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(x.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim_metric(const color::RgbImage& a, const color::RgbImage& b) {
  if (!a.same_extents(b)) throw ShapeError("ssim: extent mismatch");
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) total += ssim_plane(a.plane(c), b.plane(c), a.height(), a.width());
  return total / 3.0;
}

MetricReport evaluate(const color::RgbImage& restored, const color::RgbImage& truth) {
  return {psnr(restored, truth), ssim_metric(restored, truth)};
}

#define A2NET_INSTANTIATE_OBJECTIVE(T)                                                        \
  template diff::Tensor<T> mse_loss(const diff::Tensor<T>&, const diff::Tensor<T>&);         \
  template diff::Tensor<T> ssim_loss(const diff::Tensor<T>&, const diff::Tensor<T>&);        \
  template ComponentLoss<T> loss_y(const diff::Tensor<T>&, const diff::Tensor<T>&, LossMode); \
  template ComponentLoss<T> loss_uv(const diff::Tensor<T>&, const diff::Tensor<T>&, LossMode); \
  template ComponentLoss<T> loss_image(const diff::Tensor<T>&, const diff::Tensor<T>&,         \
                                       color::Space, LossMode);                               \
  template std::pair<diff::Tensor<T>, LossReport> total_loss(                                 \
      const ComponentLoss<T>&, const ComponentLoss<T>&, const LossWeights&);

A2NET_INSTANTIATE_OBJECTIVE(float)
A2NET_INSTANTIATE_OBJECTIVE(double)

#undef A2NET_INSTANTIATE_OBJECTIVE

}  // namespace a2net::objective
