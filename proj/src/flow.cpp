#include "breathflow/flow.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "breathflow/error.hpp"
#include "breathflow/kernels.hpp"

namespace breathflow {
namespace {

constexpr std::array<float, 5> kPresmooth{0.02f, 0.11f, 0.74f, 0.11f, 0.02f};
constexpr std::array<float, 5> kDerivative{1.0f / 12, -8.0f / 12, 0.0f, 8.0f / 12, -1.0f / 12};

double gradient_rms(const Plane& p) {
  double ss = 0.0;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) {
      const double gx = p.at(std::min(x + 1, p.width() - 1), y) - p.at(std::max(x - 1, 0), y);
      const double gy = p.at(x, std::min(y + 1, p.height() - 1)) - p.at(x, std::max(y - 1, 0));
      ss += 0.25 * (gx * gx + gy * gy);
    }
  return std::sqrt(ss / static_cast<double>(p.size()));
}

// b sampled at (x + u, y + v); mask is 0 where the target leaves the image.
void warp(const Plane& b, const Plane& u, const Plane& v, Plane& out, Plane& mask) {
  const int w = b.width(), h = b.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float tx = static_cast<float>(x) + u.at(x, y);
      const float ty = static_cast<float>(y) + v.at(x, y);
      out.at(x, y) = b.sample(tx, ty);
      const bool inside = tx >= 0.0f && tx <= static_cast<float>(w - 1) && ty >= 0.0f &&
                          ty <= static_cast<float>(h - 1);
      mask.at(x, y) = inside ? 1.0f : 0.0f;
    }
}

void refine_level(const Plane& a, const Plane& b, Plane& u, Plane& v, const FlowParams& p) {
  const int w = a.width(), h = a.height();
  const std::size_t n = a.size();
  const Plane as = filter_cols(filter_rows(a, kPresmooth), kPresmooth);
  const Plane bs = filter_cols(filter_rows(b, kPresmooth), kPresmooth);
  const float alpha = static_cast<float>(p.alpha);
  const float eps2 = static_cast<float>(p.epsilon * p.epsilon);

  Plane bw(w, h), mask(w, h), mix(w, h);
  std::vector<float> du(n), dv(n), phi(n);
  std::vector<float> a11(n), a12(n), a22(n), b1(n), b2(n);

  for (int warp_it = 0; warp_it < p.warp_iterations; ++warp_it) {
    warp(bs, u, v, bw, mask);
    for (std::size_t i = 0; i < n; ++i) mix.data()[i] = 0.4f * as.data()[i] + 0.6f * bw.data()[i];
    const Plane ix = filter_rows(mix, kDerivative);
    const Plane iy = filter_cols(mix, kDerivative);
    std::fill(du.begin(), du.end(), 0.0f);
    std::fill(dv.begin(), dv.end(), 0.0f);

    for (int irls = 0; irls < p.irls_iterations; ++irls) {
      // smoothness weights from forward differences of u + du, v + dv
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          float ux = 0, uy = 0, vx = 0, vy = 0;
          if (x < w - 1) {
            ux = (u.data()[i + 1] + du[i + 1]) - (u.data()[i] + du[i]);
            vx = (v.data()[i + 1] + dv[i + 1]) - (v.data()[i] + dv[i]);
          }
          if (y < h - 1) {
            uy = (u.data()[i + w] + du[i + w]) - (u.data()[i] + du[i]);
            vy = (v.data()[i + w] + dv[i + w]) - (v.data()[i] + dv[i]);
          }
          phi[i] = 0.5f / std::sqrt(ux * ux + uy * uy + vx * vx + vy * vy + eps2);
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const float gx = ix.data()[i], gy = iy.data()[i];
          const float it = bw.data()[i] - as.data()[i];
          const float r = it + gx * du[i] + gy * dv[i];
          const float psi = mask.data()[i] * 0.5f / std::sqrt(r * r + eps2);
          // weighted Laplacian of the current flow, same edge weights as the solver
          float lu = 0.0f, lv = 0.0f;
          const float uc = u.data()[i], vc = v.data()[i];
          if (x > 0) { lu += phi[i - 1] * (u.data()[i - 1] - uc); lv += phi[i - 1] * (v.data()[i - 1] - vc); }
          if (x < w - 1) { lu += phi[i] * (u.data()[i + 1] - uc); lv += phi[i] * (v.data()[i + 1] - vc); }
          if (y > 0) { lu += phi[i - w] * (u.data()[i - w] - uc); lv += phi[i - w] * (v.data()[i - w] - vc); }
          if (y < h - 1) { lu += phi[i] * (u.data()[i + w] - uc); lv += phi[i] * (v.data()[i + w] - vc); }
          a11[i] = psi * gx * gx;
          a12[i] = psi * gx * gy;
          a22[i] = psi * gy * gy;
          b1[i] = -psi * gx * it + alpha * lu;
          b2[i] = -psi * gy * it + alpha * lv;
        }
      const kernels::FlowSystem sys{w, h, a11, a12, a22, b1, b2, phi, phi, alpha, 0.05f * alpha};
      kernels::relax_red_black(sys, du, dv, p.relaxation_sweeps, static_cast<float>(p.omega));
    }
    for (std::size_t i = 0; i < n; ++i) {
      u.data()[i] += du[i];
      v.data()[i] += dv[i];
    }
  }
}

}  // namespace

std::vector<Plane> build_pyramid(const Plane& frame, double scale, int min_side) {
  require(scale > 0.0 && scale < 1.0, ErrorCode::kInvalidArgument,
          "pyramid scale must be in (0, 1)");
  std::vector<Plane> levels{frame};
  while (true) {
    const Plane& top = levels.back();
    const int nw = static_cast<int>(std::lround(top.width() * scale));
    const int nh = static_cast<int>(std::lround(top.height() * scale));
    if (nw < min_side || nh < min_side) break;
    levels.push_back(resize_bilinear(lowpass5(top), nw, nh));
  }
  return levels;
}

FlowEstimate estimate_flow(const GrayFrame& a, const GrayFrame& b, const FlowParams& params) {
  require(a.width() == b.width() && a.height() == b.height(), ErrorCode::kInvalidArgument,
          "flow frames differ in size");
  FlowEstimate result;
  if (std::max(gradient_rms(a.pixels()), gradient_rms(b.pixels())) < 1e-6) {
    result.flow = FlowField(a.width(), a.height());
    result.low_confidence = true;
    return result;
  }
  const auto pa = build_pyramid(a.pixels(), params.pyramid_scale, params.min_side);
  const auto pb = build_pyramid(b.pixels(), params.pyramid_scale, params.min_side);

  Plane u(pa.back().width(), pa.back().height());
  Plane v = u;
  for (int level = static_cast<int>(pa.size()) - 1; level >= 0; --level) {
    const Plane& la = pa[level];
    if (u.width() != la.width() || u.height() != la.height()) {
      const float sx = static_cast<float>(la.width()) / static_cast<float>(u.width());
      const float sy = static_cast<float>(la.height()) / static_cast<float>(u.height());
      u = resize_bilinear(u, la.width(), la.height());
      v = resize_bilinear(v, la.width(), la.height());
      for (float& x : u.data()) x *= sx;
      for (float& x : v.data()) x *= sy;
    }
    refine_level(la, pb[level], u, v, params);
  }
  result.flow.u = std::move(u);
  result.flow.v = std::move(v);
  return result;
}

HsvFrame flow_to_hsv(const FlowField& f, double mag_ref) {
  require(mag_ref > 0.0, ErrorCode::kInvalidArgument, "mag_ref must be positive");
  const int w = f.width(), h = f.height();
  HsvFrame out{Plane(w, h), Plane(w, h, 1.0f), Plane(w, h)};
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    const double u = f.u.data()[i], v = f.v.data()[i];
    double turns = std::atan2(v, u) / (2.0 * std::numbers::pi);
    if (turns < 0.0) turns += 1.0;
    if (turns >= 1.0) turns = 0.0;
    auto hue = static_cast<float>(turns);
    if (hue >= 1.0f) hue = 0.0f;
    out.h.data()[i] = hue;
    out.v.data()[i] = static_cast<float>(std::min(1.0, std::hypot(u, v) / mag_ref));
  }
  return out;
}

double hsv_vertical_mean(const HsvFrame& hsv, int x0, int y0, int x1, int y1) {
  double acc = 0.0;
  int count = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      acc += hsv.v.at(x, y) * std::sin(2.0 * std::numbers::pi * hsv.h.at(x, y));
      ++count;
    }
  return count ? acc / count : 0.0;
}

std::vector<std::size_t> select_grid_frames(std::size_t frame_count, double native_fps) {
  require(native_fps >= kFlowRateHz, ErrorCode::kInvalidArgument,
          "native frame rate must be at least 5 Hz");
  const auto count = static_cast<std::size_t>(
      std::floor(static_cast<double>(frame_count) * kFlowRateHz / native_fps + 1e-9));
  std::vector<std::size_t> picks(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / kFlowRateHz;
    picks[k] = std::min(frame_count - 1,
                        static_cast<std::size_t>(std::floor(t * native_fps + 0.5)));
  }
  return picks;
}

FlowClip make_flow_clip(std::vector<FlowField> fields, double mag_ref) {
  FlowClip clip;
  clip.hsv.reserve(fields.size());
  for (const auto& f : fields) clip.hsv.push_back(flow_to_hsv(f, mag_ref));
  clip.fields = std::move(fields);
  return clip;
}

FlowClip preprocess_clip(const std::vector<GrayFrame>& frames, double native_fps,
                         const FlowParams& params) {
  const auto picks = select_grid_frames(frames.size(), native_fps);
  require(picks.size() >= 2, ErrorCode::kDataError, "clip too short");

  std::vector<GrayFrame> small;
  small.reserve(picks.size());
  for (auto idx : picks)
    small.emplace_back(resize_bilinear(frames[idx].pixels(), kFlowSide, kFlowSide));

  std::vector<FlowField> fields(picks.size() - 1);
  const int pairs = static_cast<int>(fields.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < pairs; ++i) fields[i] = estimate_flow(small[i], small[i + 1], params).flow;
  return make_flow_clip(std::move(fields), params.hsv_mag_ref);
}

}  // namespace breathflow
