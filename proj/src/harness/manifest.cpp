#include "cappa/harness/manifest.hpp"

#include <sys/utsname.h>

#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cappa/error.hpp"
#include "cappa/harness/csv.hpp"

#ifndef CAPPA_VERSION
#define CAPPA_VERSION "unknown"
#endif

namespace cappa::harness {

std::string_view library_version() { return CAPPA_VERSION; }

std::string host_description() {
  utsname u{};
  std::string os = "unknown-os";
  if (uname(&u) == 0) os = fmt::format("{} {} {}", u.sysname, u.release, u.machine);
#if defined(__clang__)
  const std::string compiler = fmt::format("clang {}.{}.{}", __clang_major__, __clang_minor__, __clang_patchlevel__);
#elif defined(__GNUC__)
  const std::string compiler = fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__);
#else
  const std::string compiler = "unknown-compiler";
#endif
  return os + "; " + compiler;
}

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("SHA-256 computation failed");
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string RunManifest::hash() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["config"] = config;
  j["version"] = version;
  j["constants"] = constants;
  auto& runs_json = j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) runs_json.push_back({{"label", r.label}, {"seed", r.seed}});
  return sha256_hex(j.dump());
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["experiment"] = experiment;
  j["manifest_sha256"] = hash();
  j["version"] = version;
  j["host"] = host;
  j["output_dir"] = output_dir;
  j["config"] = config;
  j["constants"] = constants;
  auto& runs_json = j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs)
    runs_json.push_back(
        {{"label", r.label}, {"seed", r.seed}, {"wall_clock_ns", r.wall_clock_ns}, {"diverged", r.diverged}});
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

}  // namespace cappa::harness
