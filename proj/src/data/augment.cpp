#include "dfd/augment.hpp"

#include "dfd/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>

namespace dfd {

void AugmentParams::validate() const {
  for (double p : {flip_p, affine_p, blur_p, jitter_p, jpeg_p}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must be in [0, 1]");
  }
  if (max_rotate_deg < 0 || max_translate < 0 || brightness < 0 || contrast < 0 || saturation < 0) {
    throw ConfigError("augmentation magnitudes must be nonnegative");
  }
  if (!(scale_min > 0 && scale_min <= scale_max)) throw ConfigError("augmentation scale range is invalid");
  if (!(blur_sigma_min > 0 && blur_sigma_min <= blur_sigma_max)) throw ConfigError("blur sigma range is invalid");
  if (jpeg_quality_min < 1 || jpeg_quality_max > 100 || jpeg_quality_min > jpeg_quality_max) {
    throw ConfigError("jpeg quality range must lie in 1..100");
  }
}

void to_json(nlohmann::json& j, const AugmentParams& p) {
  j = nlohmann::json::object();
  j["flip_p"] = p.flip_p;
  j["affine_p"] = p.affine_p;
  j["max_rotate_deg"] = p.max_rotate_deg;
  j["max_translate"] = p.max_translate;
  j["scale_min"] = p.scale_min;
  j["scale_max"] = p.scale_max;
  j["blur_p"] = p.blur_p;
  j["blur_sigma_min"] = p.blur_sigma_min;
  j["blur_sigma_max"] = p.blur_sigma_max;
  j["jitter_p"] = p.jitter_p;
  j["brightness"] = p.brightness;
  j["contrast"] = p.contrast;
  j["saturation"] = p.saturation;
  j["jpeg_p"] = p.jpeg_p;
  j["jpeg_quality_min"] = p.jpeg_quality_min;
  j["jpeg_quality_max"] = p.jpeg_quality_max;
}

void from_json(const nlohmann::json& j, AugmentParams& p) {
  const AugmentParams d;
  p.flip_p = j.value("flip_p", d.flip_p);
  p.affine_p = j.value("affine_p", d.affine_p);
  p.max_rotate_deg = j.value("max_rotate_deg", d.max_rotate_deg);
  p.max_translate = j.value("max_translate", d.max_translate);
  p.scale_min = j.value("scale_min", d.scale_min);
  p.scale_max = j.value("scale_max", d.scale_max);
  p.blur_p = j.value("blur_p", d.blur_p);
  p.blur_sigma_min = j.value("blur_sigma_min", d.blur_sigma_min);
  p.blur_sigma_max = j.value("blur_sigma_max", d.blur_sigma_max);
  p.jitter_p = j.value("jitter_p", d.jitter_p);
  p.brightness = j.value("brightness", d.brightness);
  p.contrast = j.value("contrast", d.contrast);
  p.saturation = j.value("saturation", d.saturation);
  p.jpeg_p = j.value("jpeg_p", d.jpeg_p);
  p.jpeg_quality_min = j.value("jpeg_quality_min", d.jpeg_quality_min);
  p.jpeg_quality_max = j.value("jpeg_quality_max", d.jpeg_quality_max);
}

cv::Mat horizontal_flip(const cv::Mat& img) {
  cv::Mat out;
  cv::flip(img, out, 1);
  return out;
}

cv::Mat affine_transform(const cv::Mat& img, double angle_deg, double tx, double ty, double scale) {
  cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(img.cols / 2.0f, img.rows / 2.0f), angle_deg, scale);
  m.at<double>(0, 2) += tx;
  m.at<double>(1, 2) += ty;
  cv::Mat out;
  cv::warpAffine(img, out, m, img.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  return out;
}

cv::Mat gaussian_blur(const cv::Mat& img, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("blur sigma must be positive");
  cv::Mat out;
  cv::GaussianBlur(img, out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
  return out;
}

cv::Mat color_jitter(const cv::Mat& img, double brightness, double contrast, double saturation) {
  cv::Mat f;
  img.convertTo(f, CV_32FC3);
  f *= brightness;
  cv::Mat gray;
  cv::cvtColor(f, gray, cv::COLOR_RGB2GRAY);
  const double mean = cv::mean(gray)[0];
  f = (f - cv::Scalar::all(mean)) * contrast + cv::Scalar::all(mean);
  cv::cvtColor(f, gray, cv::COLOR_RGB2GRAY);
  cv::Mat gray3;
  cv::cvtColor(gray, gray3, cv::COLOR_GRAY2RGB);
  f = f * saturation + gray3 * (1.0 - saturation);
  cv::Mat out;
  f.convertTo(out, CV_8UC3);  // saturating cast
  return out;
}

cv::Mat jpeg_roundtrip(const cv::Mat& img, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must be in 1..100");
  std::vector<uchar> buf;
  cv::Mat bgr;
  cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
  cv::imencode(".jpg", bgr, buf, {cv::IMWRITE_JPEG_QUALITY, quality});
  cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
  cv::Mat out;
  cv::cvtColor(dec, out, cv::COLOR_BGR2RGB);
  return out;
}

cv::Mat augment_image(const cv::Mat& img, std::mt19937_64& rng, const AugmentParams& p, bool train) {
  if (!train) return img.clone();
  if (img.type() != CV_8UC3) throw InputError("augment_image expects an 8-bit RGB image");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  cv::Mat out = img.clone();
  if (u01(rng) < p.flip_p) out = horizontal_flip(out);
  if (u01(rng) < p.affine_p) {
    const double angle = uniform(-p.max_rotate_deg, p.max_rotate_deg);
    const double tx = uniform(-p.max_translate, p.max_translate) * out.cols;
    const double ty = uniform(-p.max_translate, p.max_translate) * out.rows;
    const double s = uniform(p.scale_min, p.scale_max);
    out = affine_transform(out, angle, tx, ty, s);
  }
  if (u01(rng) < p.blur_p) out = gaussian_blur(out, uniform(p.blur_sigma_min, p.blur_sigma_max));
  if (u01(rng) < p.jitter_p) {
    const double b = uniform(1.0 - p.brightness, 1.0 + p.brightness);
    const double c = uniform(1.0 - p.contrast, 1.0 + p.contrast);
    const double s = uniform(1.0 - p.saturation, 1.0 + p.saturation);
    out = color_jitter(out, b, c, s);
  }
  if (u01(rng) < p.jpeg_p) {
    std::uniform_int_distribution<int> q(p.jpeg_quality_min, p.jpeg_quality_max);
    out = jpeg_roundtrip(out, q(rng));
  }
  return out;
}

}  // namespace dfd
