#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "qunet/data.hpp"

// Directory ingestion lives apart from data.hpp so that only targets that
// actually read image files link against OpenCV.

namespace qunet::data {

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// stem -> path, lexicographic by stem
inline std::map<std::string, std::filesystem::path> scan_dir(const std::string& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("load_dataset: not a directory: " + dir);
  std::map<std::string, std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out[e.path().stem().string()] = e.path();
  return out;
}

}  // namespace detail

// Loads image/mask pairs matched by filename stem, in lexicographic stem
// order. Images come out as RGB in [0,1]; masks are binarized at 0.5.
inline std::vector<Sample> load_dataset(const std::string& images_dir,
                                        const std::string& masks_dir) {
  const auto images = detail::scan_dir(images_dir);
  const auto masks = detail::scan_dir(masks_dir);

  std::string missing;
  for (const auto& [stem, path] : images)
    if (masks.find(stem) == masks.end()) missing += (missing.empty() ? "" : ", ") + stem;
  if (!missing.empty())
    throw std::runtime_error("load_dataset: images without masks: " + missing);

  std::vector<Sample> out;
  for (const auto& [stem, path] : images) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("load_dataset: cannot decode " + path.string());
    cv::Mat msk = cv::imread(masks.at(stem).string(), cv::IMREAD_GRAYSCALE);
    if (msk.empty())
      throw std::runtime_error("load_dataset: cannot decode " + masks.at(stem).string());
    if (img.rows != msk.rows || img.cols != msk.cols)
      throw std::runtime_error("load_dataset: image/mask size mismatch for '" + stem + "'");

    Sample s;
    s.id = stem;
    s.image = Tensor({3, img.rows, img.cols});
    s.mask = Tensor({1, img.rows, img.cols});
    for (int y = 0; y < img.rows; ++y)
      for (int x = 0; x < img.cols; ++x) {
        const cv::Vec3b bgr = img.at<cv::Vec3b>(y, x);
        s.image.at3(0, y, x) = bgr[2] / 255.0;
        s.image.at3(1, y, x) = bgr[1] / 255.0;
        s.image.at3(2, y, x) = bgr[0] / 255.0;
        s.mask.at3(0, y, x) = msk.at<unsigned char>(y, x) / 255.0 >= 0.5 ? 1.0 : 0.0;
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace qunet::data
