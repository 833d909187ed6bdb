#include "manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include "earkd/errors.hpp"

namespace earkd::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::vector<FileHash> hash_tree(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<FileHash> out;
  if (fs::is_regular_file(path)) {
    out.push_back({path.generic_string(), sha256_file(path)});
    return out;
  }
  if (!fs::is_directory(path)) throw Error(ErrorKind::IOError, "no such file or directory: " + path.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back({f.generic_string(), sha256_file(f)});
  return out;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> arguments)
    : command_(std::move(command)),
      arguments_(std::move(arguments)),
      start_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::write(const std::filesystem::path& dir) const {
  using nlohmann::json;
  const auto hashes = [](const std::vector<std::filesystem::path>& paths) {
    json list = json::array();
    for (const auto& p : paths) {
      for (const auto& h : hash_tree(p)) list.push_back({{"path", h.path}, {"sha256", h.sha256}});
    }
    return list;
  };
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start_;
  const json j{{"command", command_},
               {"arguments", arguments_},
               {"seed", seed_},
               {"config", config_},
               {"inputs", hashes(inputs_)},
               {"outputs", hashes(outputs_)},
               {"wall_time_s", wall.count()}};
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::IOError, "cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace earkd::cli
