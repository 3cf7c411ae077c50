#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include <opencv2/imgcodecs.hpp>

#include "qunet/data.hpp"
#include "qunet/data_io.hpp"

using namespace qunet;
namespace fs = std::filesystem;

namespace {

struct TempDirs {
  fs::path root, images, masks;
  TempDirs() {
    root = fs::temp_directory_path() / ("qunet_data_test_" + std::to_string(::getpid()));
    images = root / "images";
    masks = root / "masks";
    fs::create_directories(images);
    fs::create_directories(masks);
  }
  ~TempDirs() { fs::remove_all(root); }
};

void write_png(const fs::path& p, int h, int w, unsigned char base, bool gray = false) {
  cv::Mat m = gray ? cv::Mat(h, w, CV_8UC1) : cv::Mat(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (gray)
        m.at<unsigned char>(y, x) = static_cast<unsigned char>((x + y) % 2 ? 255 : 0);
      else
        m.at<cv::Vec3b>(y, x) =
            cv::Vec3b(base, static_cast<unsigned char>(base + x), static_cast<unsigned char>(y));
    }
  cv::imwrite(p.string(), m);
}

}  // namespace

TEST_CASE("load_dataset pairs images and masks by stem") {
  TempDirs dirs;
  write_png(dirs.images / "b_fruit.png", 4, 4, 10);
  write_png(dirs.images / "a_fruit.png", 4, 4, 200);
  write_png(dirs.masks / "b_fruit.png", 4, 4, 0, true);
  write_png(dirs.masks / "a_fruit.png", 4, 4, 0, true);

  const auto samples = data::load_dataset(dirs.images.string(), dirs.masks.string());
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].id == "a_fruit");
  CHECK(samples[1].id == "b_fruit");

  for (const auto& s : samples) {
    CHECK(s.image.shape == std::vector<int>({3, 4, 4}));
    CHECK(s.mask.shape == std::vector<int>({1, 4, 4}));
    for (double v : s.image.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (double v : s.mask.data) CHECK((v == 0.0 || v == 1.0));
  }
  // 8-bit 255 binarizes to exactly 1.
  CHECK(samples[0].mask.at3(0, 0, 1) == 1.0);
  CHECK(samples[0].mask.at3(0, 0, 0) == 0.0);
}

TEST_CASE("load_dataset reports images without masks by stem") {
  TempDirs dirs;
  write_png(dirs.images / "present.png", 4, 4, 10);
  write_png(dirs.images / "orphan.png", 4, 4, 10);
  write_png(dirs.masks / "present.png", 4, 4, 0, true);
  try {
    data::load_dataset(dirs.images.string(), dirs.masks.string());
    FAIL("expected an ingestion error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("orphan") != std::string::npos);
  }
}

TEST_CASE("bilinear_resize") {
  SECTION("same-size target is the identity") {
    Rng rng(3);
    Tensor img({3, 5, 7});
    for (double& v : img.data) v = rng.uniform01();
    const Tensor out = data::bilinear_resize(img, 5, 7);
    CHECK(out.data == img.data);
  }

  SECTION("2x2 to 1x1 is the mean of the four pixels") {
    Tensor img({1, 2, 2});
    img.data = {1.0, 2.0, 3.0, 6.0};
    const Tensor out = data::bilinear_resize(img, 1, 1);
    REQUIRE(out.size() == 1);
    CHECK(std::abs(out.data[0] - 3.0) < 1e-12);
  }

  SECTION("4x4 ramp downscaled to 2x2 matches the closed form") {
    Tensor img({1, 4, 4});
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) img.at3(0, y, x) = 3.0 * x + 11.0 * y;
    const Tensor out = data::bilinear_resize(img, 2, 2);
    // Sample points sit at fractional coordinates 0.5 and 2.5 on each axis,
    // so each output is the average of a 2x2 block of the ramp.
    for (int oy = 0; oy < 2; ++oy)
      for (int ox = 0; ox < 2; ++ox) {
        const double fx = ox == 0 ? 0.5 : 2.5;
        const double fy = oy == 0 ? 0.5 : 2.5;
        CHECK(std::abs(out.at3(0, oy, ox) - (3.0 * fx + 11.0 * fy)) < 1e-12);
      }
  }

  SECTION("bad target dims") {
    Tensor img({1, 2, 2});
    CHECK_THROWS_AS(data::bilinear_resize(img, 0, 2), std::invalid_argument);
  }

  SECTION("resized masks re-binarize cleanly") {
    data::Sample s;
    s.id = "m";
    s.image = Tensor({3, 8, 8}, 0.5);
    s.mask = Tensor({1, 8, 8});
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) s.mask.at3(0, y, x) = x >= 3 && y >= 2 ? 1.0 : 0.0;
    const data::Sample r = data::resize_sample(s, 5);
    for (double v : r.mask.data) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("make_partitions") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));

  SECTION("0.8 fraction of 10 ids gives 8/2") {
    const auto parts = data::make_partitions(ids, 10, 0.8);
    REQUIRE(parts.size() == 10);
    for (const auto& p : parts) {
      CHECK(p.train_ids.size() == 8);
      CHECK(p.test_ids.size() == 2);
      auto all = p.train_ids;
      all.insert(all.end(), p.test_ids.begin(), p.test_ids.end());
      std::sort(all.begin(), all.end());
      auto sorted_ids = ids;
      std::sort(sorted_ids.begin(), sorted_ids.end());
      CHECK(all == sorted_ids);  // disjoint and covering
    }
  }

  SECTION("identical seeds give byte-identical partitions") {
    const auto a = data::make_partitions(ids, 10, 0.8);
    const auto b = data::make_partitions(ids, 10, 0.8);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].train_ids == b[k].train_ids);
      CHECK(a[k].test_ids == b[k].test_ids);
    }
  }

  SECTION("partitions actually differ from each other") {
    std::vector<std::string> many;
    for (int i = 0; i < 100; ++i) many.push_back("id" + std::to_string(i));
    const auto parts = data::make_partitions(many, 10, 0.8);
    std::set<std::vector<std::string>> distinct;
    for (const auto& p : parts) {
      auto t = p.test_ids;
      std::sort(t.begin(), t.end());
      distinct.insert(t);
    }
    CHECK(distinct.size() >= 2);
  }

  SECTION("argument errors") {
    CHECK_THROWS_AS(data::make_partitions({}, 10, 0.8), std::invalid_argument);
    CHECK_THROWS_AS(data::make_partitions(ids, 0, 0.8), std::invalid_argument);
    CHECK_THROWS_AS(data::make_partitions(ids, 10, 1.0), std::invalid_argument);
  }
}

TEST_CASE("synth_dataset") {
  const auto set = data::synth_dataset(100, 64, 7);
  REQUIRE(set.size() == 100);

  SECTION("masks are binary with foreground fraction in (0.05, 0.6)") {
    for (const auto& s : set) {
      long long fg = 0;
      for (double v : s.mask.data) {
        CHECK((v == 0.0 || v == 1.0));
        fg += v == 1.0;
      }
      const double frac = static_cast<double>(fg) / static_cast<double>(s.mask.size());
      CHECK(frac > 0.05);
      CHECK(frac < 0.6);
    }
  }

  SECTION("images stay in [0,1]") {
    for (const auto& s : set)
      for (double v : s.image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
  }

  SECTION("same seed reproduces the dataset exactly") {
    const auto again = data::synth_dataset(100, 64, 7);
    for (std::size_t i = 0; i < set.size(); ++i) {
      CHECK(set[i].id == again[i].id);
      CHECK(set[i].image.data == again[i].image.data);
      CHECK(set[i].mask.data == again[i].mask.data);
    }
  }

  SECTION("unsupported size") {
    CHECK_THROWS_AS(data::synth_dataset(1, 48, 1), std::invalid_argument);
  }
}
