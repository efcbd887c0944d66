#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "echogcn/error.hpp"
#include "echogcn/nn.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "nn";
constexpr char kMagic[8] = {'E', 'C', 'H', 'O', 'G', 'C', 'N', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& s, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  return v;
}

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  throw Error(Errc::FormatError, kModule, path + ": " + why);
}

}  // namespace

void write_weights(const std::string& path, const WeightsContent& content) {
  nlohmann::json manifest;
  manifest["format_version"] = kWeightsFormatVersion;
  manifest["metadata"] = nlohmann::json::parse(content.metadata_json);
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const WeightEntry& e : content.entries) {
    if (shape_size(e.shape) != e.data.size()) {
      throw Error(Errc::ShapeMismatch, kModule, "tensor " + e.name + " does not match its shape");
    }
    manifest["tensors"].push_back(
        {{"name", e.name}, {"shape", e.shape}, {"dtype", "float32"}, {"offset", offset}, {"length", e.data.size()}});
    offset += 4 * e.data.size();
  }
  const std::string header = manifest.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kWeightsFormatVersion);
  put_u64(out, header.size());
  out += header;
  out.reserve(out.size() + offset);
  for (const WeightEntry& e : content.entries) {
    for (float f : e.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, kModule, "cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::IoError, kModule, "write failed: " + path);
}

WeightsContent read_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, kModule, "cannot open " + path);
  const std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (s.size() < 20 || std::memcmp(s.data(), kMagic, sizeof kMagic) != 0) bad(path, "not a weights file");
  const auto version = static_cast<std::uint32_t>(get_le(s, 8, 4));
  if (version != kWeightsFormatVersion) bad(path, "unsupported format version " + std::to_string(version));
  const std::uint64_t hlen = get_le(s, 12, 8);
  if (hlen > s.size() - 20) bad(path, "truncated header");
  const std::size_t data_start = 20 + static_cast<std::size_t>(hlen);

  WeightsContent out;
  try {
    const nlohmann::json manifest = nlohmann::json::parse(s.begin() + 20, s.begin() + static_cast<std::ptrdiff_t>(data_start));
    out.metadata_json = manifest.at("metadata").dump();
    for (const auto& t : manifest.at("tensors")) {
      WeightEntry e;
      e.name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<std::vector<int>>();
      if (t.at("dtype").get<std::string>() != "float32") bad(path, "unsupported dtype for " + e.name);
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto length = t.at("length").get<std::uint64_t>();
      if (length != shape_size(e.shape)) bad(path, "length/shape mismatch for " + e.name);
      if (offset % 4 != 0 || offset + 4 * length > s.size() - data_start) bad(path, "tensor " + e.name + " out of bounds");
      e.data.resize(length);
      for (std::uint64_t k = 0; k < length; ++k) {
        e.data[k] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(s, data_start + offset + 4 * k, 4)));
      }
      out.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    bad(path, std::string("bad manifest: ") + ex.what());
  }
  return out;
}

}  // namespace echogcn
