#include "koa/interpret/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "koa/common/errors.hpp"
#include "koa/interpret/overlay.hpp"

namespace koa::viz {

double Heatmap::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

std::pair<int, int> Heatmap::argmax() const {
  if (values.empty()) throw DomainError("argmax of an empty heatmap");
  const auto i = static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
  return {i / cols, i % cols};
}

Heatmap grad_cam_from(const torch::Tensor& features, const torch::Tensor& gradients, int out_rows, int out_cols,
                      std::string layer) {
  if (features.dim() != 3 || features.size(1) < 1 || features.size(2) < 1)
    throw ShapeError("grad-cam: layer " + layer + " has no spatial extent");
  if (!features.sizes().equals(gradients.sizes())) throw ShapeError("grad-cam: gradient shape differs from features");
  if (out_rows < 1 || out_cols < 1) throw ShapeError("grad-cam: output size must be positive");
  torch::NoGradGuard ng;
  const auto f = features.detach().to(torch::kFloat64);
  const auto w = gradients.detach().to(torch::kFloat64).mean({1, 2}, true);
  auto cam = torch::relu((w * f).sum(0, true)).unsqueeze(0);  // 1 x 1 x h x w
  if (cam.size(2) != out_rows || cam.size(3) != out_cols) {
    cam = torch::nn::functional::interpolate(cam, torch::nn::functional::InterpolateFuncOptions()
                                                       .size(std::vector<std::int64_t>{out_rows, out_cols})
                                                       .mode(torch::kBilinear)
                                                       .align_corners(false));
  }
  cam = cam.reshape({out_rows, out_cols}).clamp_min(0.0).contiguous();
  Heatmap h;
  h.rows = out_rows;
  h.cols = out_cols;
  h.layer = std::move(layer);
  h.values.assign(cam.data_ptr<double>(), cam.data_ptr<double>() + cam.numel());
  const double m = h.max();
  if (m > 0.0)
    for (auto& v : h.values) v /= m;
  return h;
}

Heatmap grad_cam(cnn::ClassifierNet& model, const GrayImage& img, data::Stage target) {
  const int size = model->config().image_size;
  if (img.rows != size || img.cols != size)
    throw ShapeError("grad-cam: image is " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                     ", model expects " + std::to_string(size));
  const auto dtype = model->parameters().front().scalar_type();
  const auto x = cnn::images_to_tensor({img}).to(dtype);
  const auto feats = model->features(x);
  if (feats.dim() != 4) throw ShapeError("grad-cam: pre-flattening layer has no spatial extent");
  const auto score = model->head(feats).select(0, 0).select(0, data::index_of(target));
  const auto grads = torch::autograd::grad({score}, {feats});
  return grad_cam_from(feats.select(0, 0), grads[0].select(0, 0), size, size, "pre-flatten");
}

RgbImage heatmap_overlay(const GrayImage& img, const Heatmap& map, double alpha) {
  if (img.rows != map.rows || img.cols != map.cols) throw ShapeError("heatmap overlay: shape mismatch");
  const auto& cm = inferno();
  RgbImage out(img.rows, img.cols);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto level = static_cast<std::size_t>(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
    const auto g = img.pixels[i];
    out.pixels[i] = blend(cm[level], {g, g, g}, alpha);
  }
  return out;
}

}  // namespace koa::viz
