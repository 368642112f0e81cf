#pragma once

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "koa/classifier/classifier.hpp"
#include "koa/common/image.hpp"

namespace koa::viz {

// Non-negative map normalized so its maximum is 1 (an all-zero map stays zero).
struct Heatmap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  std::string layer;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  double max() const;
  // Row-major first maximum.
  std::pair<int, int> argmax() const;
};

// ReLU(sum_k mean(grad_k) * feature_k), bilinearly resized to out_rows x out_cols and
// max-normalized. Both tensors are K x h x w. Throws ShapeError otherwise.
Heatmap grad_cam_from(const torch::Tensor& features, const torch::Tensor& gradients, int out_rows, int out_cols,
                      std::string layer = "features");

// Grad-CAM of the class score at the classifier's pre-flattening feature map.
Heatmap grad_cam(cnn::ClassifierNet& model, const GrayImage& img, data::Stage target);

// Inferno-coloured heatmap blended over the grey image.
RgbImage heatmap_overlay(const GrayImage& img, const Heatmap& map, double alpha = 0.5);

}  // namespace koa::viz
