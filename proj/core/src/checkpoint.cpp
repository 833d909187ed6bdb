#include "earkd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "earkd/config.hpp"
#include "earkd/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace earkd::checkpoint {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "EARKDCKP";
constexpr int kVersion = 1;

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorKind::CorruptContainer, "checkpoint: " + what);
}

[[noreturn]] void mismatch(const std::string& what) {
  throw Error(ErrorKind::CheckpointMismatch, what);
}

}  // namespace

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  ModelConfig x = a;
  x.seed = b.seed;
  return x == b;
}

std::string serialize(const SleepStager& model, const Metadata& metadata) {
  json tensors = json::array();
  std::size_t values = 0;
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.shape}});
    values += p.values.size();
  }
  const json header{{"format", "earkd-checkpoint"},
                    {"version", kVersion},
                    {"model_config", json::parse(to_json(model.config()))},
                    {"metadata", metadata},
                    {"tensors", tensors}};
  const std::string text = header.dump();

  std::string out;
  out.reserve(kMagic.size() + 8 + text.size() + values * sizeof(double));
  out.append(kMagic);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out.append(text);
  for (const auto& p : model.parameters()) {
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size() * sizeof(double));
  }
  return out;
}

Loaded deserialize(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    corrupt("bad magic");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + kMagic.size(), sizeof len);
  const std::size_t body = kMagic.size() + 8;
  if (len > bytes.size() - body) corrupt("header length exceeds file size");

  json header;
  try {
    header = json::parse(bytes.substr(body, len));
  } catch (const json::parse_error& e) {
    corrupt(std::string("unreadable header: ") + e.what());
  }
  if (header.value("format", "") != "earkd-checkpoint" || header.value("version", 0) != kVersion) {
    corrupt("unsupported format or version");
  }

  Loaded out;
  try {
    const ModelConfig config = model_config_from_json(header.at("model_config").dump());
    out.model = build_stager(config);
    out.metadata = header.at("metadata").get<Metadata>();
  } catch (const json::exception& e) {
    corrupt(std::string("malformed header: ") + e.what());
  }

  auto& params = out.model->parameters();
  const json& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != params.size()) {
    mismatch("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
             std::to_string(params.size()));
  }
  std::size_t offset = body + len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = tensors[i].at("name").get<std::string>();
    const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
    if (name != params[i].name || shape != params[i].shape) {
      mismatch("tensor " + std::to_string(i) + " '" + name + "' does not match model tensor '" +
               params[i].name + "'");
    }
    const std::size_t nbytes = params[i].values.size() * sizeof(double);
    if (bytes.size() - offset < nbytes) corrupt("truncated tensor data");
    std::memcpy(params[i].values.data(), bytes.data() + offset, nbytes);
    offset += nbytes;
  }
  if (offset != bytes.size()) corrupt("trailing bytes after tensor data");
  return out;
}

void save(const std::filesystem::path& path, const SleepStager& model, const Metadata& metadata) {
  const std::string bytes = serialize(model, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IOError, "write failed for " + path.string());
}

Loaded load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

Loaded load(const std::filesystem::path& path, const ModelConfig& expected) {
  Loaded out = load(path);
  if (!same_architecture(out.model->config(), expected)) {
    mismatch("checkpoint architecture " + to_json(out.model->config()) + " does not match " +
             to_json(expected));
  }
  return out;
}

}  // namespace earkd::checkpoint
