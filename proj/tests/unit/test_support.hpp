// Copyright 2026 The fairexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef FAIREXPR_TESTS_UNIT_TEST_SUPPORT_HPP_
#define FAIREXPR_TESTS_UNIT_TEST_SUPPORT_HPP_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include "fairexpr/image.hpp"
#include "fairexpr/model.hpp"
#include "fairexpr/random.hpp"

namespace fairexpr::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fairexpr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Image random_image(int side, std::uint64_t seed, int channels = 3) {
  Rng rng(seed);
  Image img(side, side, channels);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

inline Tensor random_batch(std::size_t batch, int side, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({batch, 3, static_cast<std::size_t>(side), static_cast<std::size_t>(side)});
  for (auto& v : t.values()) v = rng.uniform();
  return t;
}

inline ModelSpec tiny_spec(HeadKind kind, int num_classes, AttributeSchema schema = {}, int side = 16,
                           int feature_dim = 12) {
  ModelSpec spec;
  spec.backbone = BackboneSpec::tiny(side, feature_dim);
  spec.backbone.tiny_channels = {4, 6, 8};
  spec.head.kind = kind;
  spec.head.num_classes = num_classes;
  spec.head.schema = std::move(schema);
  return spec;
}

}  // namespace fairexpr::testing

#endif  // FAIREXPR_TESTS_UNIT_TEST_SUPPORT_HPP_
