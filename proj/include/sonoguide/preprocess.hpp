#pragma once

// Frame conditioning: centre crop with aspect-preserving resize onto a square
// canvas, and an edge-preserving smoothing filter.

#include "sonoguide/volume.hpp"

namespace sonoguide {

struct CropSpec {
  int crop_w = 288;
  int crop_h = 224;
  int out = 160;
  float pad_value = 0.0f;
};

/// Centre-crops to crop_w x crop_h, scales the longest side to `out` with
/// bilinear resampling and pads the short side symmetrically. Throws
/// std::invalid_argument when the frame is smaller than the crop.
SliceImage crop_resize(const SliceImage& frame, const CropSpec& spec = {});

/// Bilateral filter: Gaussian spatial weights (sigma = radius / 2) times
/// Gaussian range weights with the given intensity sigma.
SliceImage smooth(const SliceImage& image, int radius = 2, double intensity_sigma = 0.1);

}  // namespace sonoguide
