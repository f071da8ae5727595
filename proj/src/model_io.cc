// Copyright 2026 The latent_gait Authors.
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

#include "latent_gait/model_io.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are written with native little-endian layout");

constexpr char kMagic[8] = {'L', 'G', 'V', 'A', 'E', 'M', 'D', 'L'};

template <typename T>
void Put(std::vector<unsigned char>* out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out->insert(out->end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string GetString(std::uint64_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void Need(std::uint64_t n) const {
    if (n > end_ - pos_) throw Error(ErrorCode::kCorruptFile, "model file is truncated");
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t Crc(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<unsigned char> SerializeModel(const VaeModel& model, const std::string& robot_hash) {
  std::vector<unsigned char> out(kMagic, kMagic + sizeof(kMagic));
  Put<std::uint32_t>(&out, kModelFormatVersion);
  const nlohmann::json header = {
      {"config", model.config.ToJson()}, {"step", model.step}, {"robot_hash", robot_hash}};
  const std::string text = header.dump();
  Put<std::uint64_t>(&out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  const int d = model.stats.dim();
  Put<std::uint32_t>(&out, static_cast<std::uint32_t>(d));
  for (int i = 0; i < d; ++i) Put<double>(&out, model.stats.mean()(i));
  for (int i = 0; i < d; ++i) Put<double>(&out, model.stats.stddev()(i));
  const Eigen::VectorXd params = model.Parameters();
  Put<std::uint64_t>(&out, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) Put<double>(&out, params(i));
  Put<std::uint32_t>(&out, Crc(out.data(), out.size()));
  return out;
}

VaeModel DeserializeModel(const std::vector<unsigned char>& bytes, std::string* robot_hash) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kCorruptFile, "not a model file");
  }
  const std::size_t body = bytes.size() - 4;
  Reader in(bytes, body);
  in.GetString(sizeof(kMagic));
  const auto version = in.Get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, "model file version " + std::to_string(version) +
                                                 ", expected " +
                                                 std::to_string(kModelFormatVersion));
  }
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != Crc(bytes.data(), body)) {
    throw Error(ErrorCode::kCorruptFile, "checksum mismatch");
  }

  nlohmann::json header;
  VaeConfig config;
  try {
    header = nlohmann::json::parse(in.GetString(in.Get<std::uint64_t>()));
    config = VaeConfig::FromJson(header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("bad header: ") + e.what());
  }
  const auto d = in.Get<std::uint32_t>();
  if (static_cast<int>(d) != config.state_dim) {
    throw Error(ErrorCode::kCorruptFile, "stats block does not match config");
  }
  Eigen::VectorXd mean(d), stddev(d);
  for (std::uint32_t i = 0; i < d; ++i) mean(i) = in.Get<double>();
  for (std::uint32_t i = 0; i < d; ++i) stddev(i) = in.Get<double>();

  VaeModel model = VaeModel::Create(config, NormalizationStats(mean, stddev));
  const auto n = in.Get<std::uint64_t>();
  if (n != static_cast<std::uint64_t>(model.ParameterCount())) {
    throw Error(ErrorCode::kCorruptFile, "parameter count does not match config");
  }
  in.Need(n * sizeof(double));
  Eigen::VectorXd params(n);
  for (std::uint64_t i = 0; i < n; ++i) params(i) = in.Get<double>();
  if (in.pos() != body) throw Error(ErrorCode::kCorruptFile, "trailing bytes");
  model.SetParameters(params);
  model.step = header.value("step", std::int64_t{0});
  if (robot_hash != nullptr) *robot_hash = header.value("robot_hash", std::string());
  return model;
}

void SaveModel(const VaeModel& model, const std::string& path, const std::string& robot_hash) {
  const auto bytes = SerializeModel(model, robot_hash);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

VaeModel LoadModel(const std::string& path, std::string* robot_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kModelMissing, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return DeserializeModel(bytes, robot_hash);
}

}  // namespace latent_gait
