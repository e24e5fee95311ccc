#include "rppg/unsupervised.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace rppg {
namespace {

constexpr double kEps = 1e-12;

void check_channels(const RgbTrace& t, Eigen::Index min_len) {
  if (t.r.size() != t.g.size() || t.r.size() != t.b.size())
    throw LengthMismatch("rgb channels must have equal length");
  if (t.r.size() < min_len)
    throw TraceTooShort("need at least " + std::to_string(min_len) + " frames");
  if (!(t.sample_rate_hz > 0.0) || !std::isfinite(t.sample_rate_hz))
    throw InvalidRate("trace sample rate must be positive and finite");
}

// Channels stacked as rows, each divided by its mean and centered at zero.
// The caller names the error to raise on a (near-)zero channel mean.
Eigen::Matrix3Xd normalized_channels(const RgbTrace& t, bool windowed) {
  Eigen::Matrix3Xd c(3, t.size());
  c.row(0) = t.r.transpose();
  c.row(1) = t.g.transpose();
  c.row(2) = t.b.transpose();
  for (int ch = 0; ch < 3; ++ch) {
    const double m = c.row(ch).mean();
    if (std::abs(m) < kEps) {
      if (windowed) throw DegenerateWindow("channel mean is zero inside a window");
      throw DegenerateTrace("channel mean is zero");
    }
    c.row(ch) = c.row(ch) / m - Eigen::RowVectorXd::Ones(c.cols());
  }
  return c;
}

double row_std(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().mean());
}

PpgSignal as_signal(Eigen::VectorXd samples, const RgbTrace& t) {
  PpgSignal out;
  out.samples = std::move(samples);
  out.sample_rate_hz = t.sample_rate_hz;
  out.t0_s = t.t0_s;
  return out;
}

}  // namespace

PixelMask rasterize_polygon(const std::vector<Eigen::Vector2d>& polygon,
                            Eigen::Index width, Eigen::Index height) {
  PixelMask mask(height, width);
  mask.setConstant(false);
  const std::size_t n = polygon.size();
  if (n < 3) return mask;
  for (Eigen::Index y = 0; y < height; ++y) {
    const double py = static_cast<double>(y) + 0.5;
    for (Eigen::Index x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = polygon[i];
        const auto& b = polygon[j];
        const bool crosses = (a.y() > py) != (b.y() > py);
        if (crosses && px < (b.x() - a.x()) * (py - a.y()) / (b.y() - a.y()) + a.x())
          inside = !inside;
      }
      mask(y, x) = inside;
    }
  }
  return mask;
}

std::vector<RoiMask> default_roi_masks(Eigen::Index width, Eigen::Index height) {
  struct Box {
    const char* name;
    double x0, y0, x1, y1;
  };
  // Normalized face-crop coordinates, x to the right, y down.
  static const Box kBoxes[] = {
      {"forehead", 0.30, 0.08, 0.70, 0.22},     {"left_temple", 0.12, 0.20, 0.27, 0.34},
      {"right_temple", 0.73, 0.20, 0.88, 0.34}, {"nose", 0.42, 0.35, 0.58, 0.55},
      {"left_cheek", 0.18, 0.45, 0.38, 0.65},   {"right_cheek", 0.62, 0.45, 0.82, 0.65},
      {"chin", 0.38, 0.75, 0.62, 0.90},
  };
  std::vector<RoiMask> out;
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  for (const Box& box : kBoxes) {
    RoiMask roi;
    roi.name = box.name;
    roi.polygon = {{box.x0 * w, box.y0 * h},
                   {box.x1 * w, box.y0 * h},
                   {box.x1 * w, box.y1 * h},
                   {box.x0 * w, box.y1 * h}};
    out.push_back(std::move(roi));
  }
  return out;
}

Eigen::Vector3d roi_mean(const FrameImage& frame, const RoiMask& roi) {
  if (frame.g.rows() != frame.r.rows() || frame.b.rows() != frame.r.rows() ||
      frame.g.cols() != frame.r.cols() || frame.b.cols() != frame.r.cols())
    throw LengthMismatch("frame channels must have equal shape");
  PixelMask mask = roi.mask.size() > 0
                       ? roi.mask
                       : rasterize_polygon(roi.polygon, frame.width(), frame.height());
  if (mask.rows() != frame.height() || mask.cols() != frame.width())
    throw LengthMismatch("mask shape does not match frame shape");

  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Index count = 0;
  for (Eigen::Index y = 0; y < mask.rows(); ++y)
    for (Eigen::Index x = 0; x < mask.cols(); ++x)
      if (mask(y, x)) {
        sum[0] += frame.r(y, x);
        sum[1] += frame.g(y, x);
        sum[2] += frame.b(y, x);
        ++count;
      }
  if (count == 0) throw EmptyMask("region '" + roi.name + "' covers no pixel");
  return sum / static_cast<double>(count);
}

RgbTrace average_rois(const RoiTraceSet& traces) {
  validate(traces);
  if (traces.num_rois() == 0) throw EmptyMask("trace set has no regions");
  const Eigen::Index t = traces.num_frames();
  RgbTrace out;
  out.r = Eigen::VectorXd::Zero(t);
  out.g = Eigen::VectorXd::Zero(t);
  out.b = Eigen::VectorXd::Zero(t);
  for (Eigen::Index roi = 0; roi < traces.num_rois(); ++roi) {
    out.r += traces.traces.col(3 * roi + 0);
    out.g += traces.traces.col(3 * roi + 1);
    out.b += traces.traces.col(3 * roi + 2);
  }
  const double nr = static_cast<double>(traces.num_rois());
  out.r /= nr;
  out.g /= nr;
  out.b /= nr;
  out.sample_rate_hz = frame_rate(traces);
  out.t0_s = traces.timestamps_s[0];
  return out;
}

PpgSignal pos(const RgbTrace& trace) {
  const Eigen::Index t = trace.size();
  const Eigen::Index win =
      static_cast<Eigen::Index>(std::llround(1.6 * trace.sample_rate_hz));
  check_channels(trace, std::max<Eigen::Index>(win, 2));

  Eigen::Matrix3Xd c(3, t);
  c.row(0) = trace.r.transpose();
  c.row(1) = trace.g.transpose();
  c.row(2) = trace.b.transpose();

  Eigen::Matrix<double, 2, 3> proj;
  proj << 0, 1, -1, -2, 1, 1;

  Eigen::VectorXd h = Eigen::VectorXd::Zero(t);
  for (Eigen::Index end = win - 1; end < t; ++end) {
    const Eigen::Index start = end - win + 1;
    Eigen::Matrix3Xd cn = c.middleCols(start, win);
    for (int ch = 0; ch < 3; ++ch) {
      const double m = cn.row(ch).mean();
      if (std::abs(m) < kEps) throw DegenerateWindow("channel mean is zero inside a window");
      cn.row(ch) /= m;
    }
    const Eigen::Matrix2Xd s = proj * cn;
    const double s2 = row_std(s.row(1));
    const double alpha = s2 < kEps ? 0.0 : row_std(s.row(0)) / s2;
    Eigen::RowVectorXd p = s.row(0) + alpha * s.row(1);
    p.array() -= p.mean();
    h.segment(start, win) += p.transpose();
  }
  return as_signal(std::move(h), trace);
}

PpgSignal chrom(const RgbTrace& trace) {
  check_channels(trace, 2);
  Eigen::VectorXd rn = trace.r, gn = trace.g, bn = trace.b;
  for (Eigen::VectorXd* ch : {&rn, &gn, &bn}) {
    const double m = ch->mean();
    if (std::abs(m) < kEps) throw DegenerateTrace("channel mean is zero");
    *ch /= m;
  }
  const Eigen::VectorXd xs = 3.0 * rn - 2.0 * gn;
  const Eigen::VectorXd ys = 1.5 * rn + gn - 1.5 * bn;
  const double sy = population_std(ys);
  const double alpha = sy < kEps ? 0.0 : population_std(xs) / sy;
  Eigen::VectorXd h = xs - alpha * ys;
  h.array() -= h.mean();
  return as_signal(std::move(h), trace);
}

Eigen::Vector3d default_pbv_signature() {
  return Eigen::Vector3d(0.33, 0.77, 0.53).normalized();
}

PpgSignal pbv(const RgbTrace& trace) { return pbv(trace, default_pbv_signature()); }

PpgSignal pbv(const RgbTrace& trace, const Eigen::Vector3d& signature) {
  check_channels(trace, 2);
  if (!(signature.norm() > kEps)) throw SingularCovariance("signature must be non-zero");
  const Eigen::Vector3d p = signature.normalized();
  const Eigen::Matrix3Xd cn = normalized_channels(trace, false);
  const Eigen::Matrix3d q = cn * cn.transpose() / static_cast<double>(cn.cols());

  // A covariance this close to rank deficient has no usable inverse.
  const double scale = q.trace() / 3.0;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(q);
  lu.setThreshold(1e-10);
  if (scale < kEps || !lu.isInvertible())
    throw SingularCovariance("channel covariance is singular");

  const Eigen::Vector3d qp = lu.solve(p);
  const Eigen::Vector3d w = qp / p.dot(qp);
  Eigen::VectorXd h = (w.transpose() * cn).transpose();
  h.array() -= h.mean();
  return as_signal(std::move(h), trace);
}

PpgSignal omit(const RgbTrace& trace) {
  check_channels(trace, 2);
  Eigen::Vector3d mean_color(trace.r.mean(), trace.g.mean(), trace.b.mean());
  if (mean_color.norm() < kEps) throw DegenerateTrace("mean color is zero");
  const Eigen::Vector3d q1 = mean_color.normalized();

  // Complete q1 to an orthonormal basis, seeding with the axis least
  // aligned with it.
  int least = 0;
  q1.cwiseAbs().minCoeff(&least);
  Eigen::Vector3d u2 = Eigen::Vector3d::Unit(least);
  u2 = (u2 - q1 * q1.dot(u2)).normalized();
  const Eigen::Vector3d u3 = q1.cross(u2);

  const Eigen::Matrix3Xd cn = normalized_channels(trace, false);
  const Eigen::RowVectorXd y2 = u2.transpose() * cn;
  const Eigen::RowVectorXd y3 = u3.transpose() * cn;
  const double s2 = row_std(y2);
  const double s3 = row_std(y3);
  if (std::max(s2, s3) < kEps)
    throw DegenerateTrace("no variation orthogonal to the mean color");
  Eigen::VectorXd h = (s2 >= s3 ? y2 : y3).transpose();
  h.array() -= h.mean();
  return as_signal(std::move(h), trace);
}

}  // namespace rppg
