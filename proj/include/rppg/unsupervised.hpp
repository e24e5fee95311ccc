#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rppg/signal.hpp"

namespace rppg {

/// One video frame as planar RGB, rows = height, cols = width, values in
/// [0, 1] or [0, 255]; roi_mean is scale agnostic.
struct FrameImage {
  Eigen::MatrixXd r, g, b;

  Eigen::Index height() const { return r.rows(); }
  Eigen::Index width() const { return r.cols(); }
};

using PixelMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Named region, either a polygon in pixel coordinates or an explicit mask
/// (used when non-empty).
struct RoiMask {
  std::string name;
  std::vector<Eigen::Vector2d> polygon;
  PixelMask mask;
};

/// Mean color of one region over its three channels.
struct RgbTrace {
  Eigen::VectorXd r, g, b;
  double sample_rate_hz = 0.0;
  double t0_s = 0.0;

  Eigen::Index size() const { return r.size(); }
};

/// Even-odd rasterization of a polygon, sampled at pixel centers.
PixelMask rasterize_polygon(const std::vector<Eigen::Vector2d>& polygon,
                            Eigen::Index width, Eigen::Index height);

/// The fixed seven-region face layout (forehead, temples, nose, cheeks,
/// chin) scaled to a width x height face crop.
std::vector<RoiMask> default_roi_masks(Eigen::Index width, Eigen::Index height);

/// Mean (r, g, b) over the region's pixels. Throws EmptyMask when the
/// region covers no pixel.
Eigen::Vector3d roi_mean(const FrameImage& frame, const RoiMask& roi);

/// Mean of all regions' channels, one RGB trace for a whole trace set.
RgbTrace average_rois(const RoiTraceSet& traces);

/// Plane-orthogonal-to-skin pulse extraction (Wang et al. 2017) with
/// 1.6 s sliding windows and overlap-add.
PpgSignal pos(const RgbTrace& trace);

/// Chrominance-based extraction (de Haan and Jeanne 2013), whole signal.
PpgSignal chrom(const RgbTrace& trace);

Eigen::Vector3d default_pbv_signature();

/// Blood-volume-pulse signature projection (de Haan and van Leest 2014).
PpgSignal pbv(const RgbTrace& trace);
PpgSignal pbv(const RgbTrace& trace, const Eigen::Vector3d& signature);

/// Orthogonal-to-mean-color projection; keeps the stronger of the two
/// directions orthogonal to the mean color axis.
PpgSignal omit(const RgbTrace& trace);

}  // namespace rppg
