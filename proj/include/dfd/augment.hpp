#pragma once

#include <json.hpp>
#include <opencv2/core.hpp>

#include <random>

namespace dfd {

struct AugmentParams {
  double flip_p = 0.5;

  double affine_p = 0.5;
  double max_rotate_deg = 10.0;
  double max_translate = 0.05;  // fraction of width/height
  double scale_min = 0.95;
  double scale_max = 1.05;

  double blur_p = 0.3;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.5;

  double jitter_p = 0.5;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;

  double jpeg_p = 0.5;
  int jpeg_quality_min = 60;
  int jpeg_quality_max = 95;

  void validate() const;
};

void to_json(nlohmann::json& j, const AugmentParams& p);
void from_json(const nlohmann::json& j, AugmentParams& p);

// Individual families, all on RGB8 images.
cv::Mat horizontal_flip(const cv::Mat& img);
cv::Mat affine_transform(const cv::Mat& img, double angle_deg, double tx, double ty, double scale);
cv::Mat gaussian_blur(const cv::Mat& img, double sigma);
cv::Mat color_jitter(const cv::Mat& img, double brightness, double contrast, double saturation);
cv::Mat jpeg_roundtrip(const cv::Mat& img, int quality);

// Train mode: each family fires with its probability, in the order
// flip, affine, blur, jitter, jpeg. Eval mode returns an exact copy and
// does not touch `rng`.
cv::Mat augment_image(const cv::Mat& img, std::mt19937_64& rng, const AugmentParams& params, bool train = true);

}  // namespace dfd
