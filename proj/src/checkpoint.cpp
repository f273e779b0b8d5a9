#include "policygnn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "policygnn/binary_io.hpp"

namespace policygnn {

namespace {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string weight_blob(const nn::GnnModel& model) {
  std::ostringstream out(std::ios::binary);
  binary::write_magic(out, "GNNW");
  binary::write_u32(out, kCheckpointVersion);
  const auto& params = model.parameters();
  binary::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    binary::write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    binary::write_u32(out, static_cast<std::uint32_t>(p.value.rows()));
    binary::write_u32(out, static_cast<std::uint32_t>(p.value.cols()));
  }
  std::vector<float> buf;
  for (const auto& p : params) {
    buf.resize(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(p.value.data()[i]);
    binary::write_f32(out, buf);
  }
  return out.str();
}

}  // namespace

void round_to_float(nn::GnnModel& model) {
  for (auto& p : model.parameters()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      p.value.data()[i] = static_cast<double>(static_cast<float>(p.value.data()[i]));
    }
  }
}

std::string save_checkpoint(const std::filesystem::path& dir, const nn::GnnModel& model, const Scaler& scaler,
                            const nlohmann::json& metadata) {
  std::filesystem::create_directories(dir);
  const std::string blob = weight_blob(model);
  const std::string id = fnv1a_hex(blob);
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + (dir / "weights.bin").string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  nlohmann::json manifest = {{"format", "GNNW"},
                             {"version", kCheckpointVersion},
                             {"checkpoint_id", id},
                             {"architecture", model.config().to_json()},
                             {"feature_spec_version", kFeatureSpecVersion},
                             {"scaler", scaler.to_json()},
                             {"parameter_count", model.count_parameters()},
                             {"metadata", metadata}};
  std::ofstream(dir / "manifest.json") << manifest.dump(1) << '\n';
  return id;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw CheckpointError("no manifest.json in " + dir.string());
  const auto manifest = nlohmann::json::parse(min);
  if (manifest.value("format", "") != "GNNW") throw CheckpointError(dir.string() + ": not a checkpoint manifest");
  const auto fsv = manifest.value("feature_spec_version", 0u);
  if (fsv != kFeatureSpecVersion) {
    throw CheckpointError("checkpoint feature spec version " + std::to_string(fsv) + " does not match " +
                          std::to_string(kFeatureSpecVersion));
  }

  Checkpoint ck{nn::GnnModel(nn::ModelConfig::from_json(manifest.at("architecture"))),
                Scaler::from_json(manifest.at("scaler")), "", manifest.value("metadata", nlohmann::json::object())};

  std::ifstream in(dir / "weights.bin", std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + (dir / "weights.bin").string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ck.id = fnv1a_hex(blob);
  if (manifest.contains("checkpoint_id") && manifest["checkpoint_id"] != ck.id) {
    throw CheckpointError(dir.string() + ": weights do not match manifest checkpoint id");
  }

  std::istringstream bin(blob, std::ios::binary);
  try {
    binary::expect_magic(bin, "GNNW");
    const auto version = binary::read_u32(bin);
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto count = binary::read_u32(bin);
    auto& params = ck.model.parameters();
    if (count != params.size()) {
      throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, architecture expects " +
                            std::to_string(params.size()));
    }
    for (auto& p : params) {
      const auto len = binary::read_u32(bin);
      std::string name(len, '\0');
      bin.read(name.data(), len);
      const auto rows = binary::read_u32(bin);
      const auto cols = binary::read_u32(bin);
      if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
        throw CheckpointError("tensor '" + name + "' does not match architecture slot '" + p.name + "'");
      }
    }
    for (auto& p : params) {
      const auto values = binary::read_f32(bin, static_cast<std::size_t>(p.value.size()));
      for (std::size_t i = 0; i < values.size(); ++i) p.value.data()[i] = static_cast<double>(values[i]);
    }
  } catch (const binary::FormatError& e) {
    throw CheckpointError(dir.string() + "/weights.bin: " + e.what());
  }
  ck.model.zero_grad();
  return ck;
}

}  // namespace policygnn
