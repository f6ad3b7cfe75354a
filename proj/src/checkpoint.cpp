#include "liss/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "liss/errors.hpp"

namespace fs = std::filesystem;

namespace liss {

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'S', 'A', 'R'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "array files are written in native order; add byte swapping for big-endian hosts");

std::uint32_t dtype_code(torch::ScalarType t) {
  switch (t) {
  case torch::kFloat32:
    return 1;
  case torch::kFloat64:
    return 2;
  case torch::kInt64:
    return 3;
  default:
    throw IoError(std::string("unsupported array dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_code(std::uint32_t code) {
  switch (code) {
  case 1:
    return torch::kFloat32;
  case 2:
    return torch::kFloat64;
  case 3:
    return torch::kInt64;
  default:
    throw IoError("unknown dtype code " + std::to_string(code));
  }
}

template <typename T> void put(std::ofstream &out, T v) {
  out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T> T get(std::ifstream &in, const fs::path &file) {
  T v{};
  if (!in.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw IoError("truncated array file " + file.string());
  return v;
}

} // namespace

const torch::Tensor &Checkpoint::array(const std::string &name) const {
  for (const auto &[n, t] : arrays)
    if (n == name) return t;
  throw LookupError("checkpoint has no array '" + name + "'");
}

void write_array(const fs::path &file, const torch::Tensor &t) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  auto c = t.detach().contiguous().cpu();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, dtype_code(c.scalar_type()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.dim()));
  for (auto d : c.sizes()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  out.write(static_cast<const char *>(c.data_ptr()),
            static_cast<std::streamsize>(c.numel() * c.element_size()));
  if (!out) throw IoError("failed writing " + file.string());
}

torch::Tensor read_array(const fs::path &file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(file.string() + " is not an array file");
  if (get<std::uint32_t>(in, file) != kVersion)
    throw IoError(file.string() + " has an unsupported format version");
  const auto dtype = dtype_from_code(get<std::uint32_t>(in, file));
  const auto rank = get<std::uint32_t>(in, file);
  std::vector<std::int64_t> dims(rank);
  for (auto &d : dims) d = static_cast<std::int64_t>(get<std::uint64_t>(in, file));
  auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
  in.read(static_cast<char *>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
  if (!in) throw IoError("truncated array file " + file.string());
  return t;
}

void write_checkpoint(const fs::path &dir, const Checkpoint &ckpt) {
  std::error_code ec;
  fs::create_directories(dir / "arrays", ec);
  if (ec) throw IoError("cannot create " + (dir / "arrays").string() + ": " + ec.message());

  nlohmann::json index = nlohmann::json::array();
  for (const auto &[name, t] : ckpt.arrays) {
    const auto file = "arrays/" + name + ".arr";
    write_array(dir / file, t);
    index.push_back({{"name", name},
                     {"file", file},
                     {"dtype", c10::toString(t.scalar_type())},
                     {"shape", t.sizes().vec()}});
  }
  nlohmann::json manifest = {{"format", "liss-checkpoint"}, {"version", kVersion},
                             {"meta", ckpt.meta}, {"arrays", index}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Checkpoint read_checkpoint(const fs::path &dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto &entry : manifest.at("arrays")) {
    auto t = read_array(dir / entry.at("file").get<std::string>());
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    if (t.sizes().vec() != shape)
      throw IoError("array '" + entry.at("name").get<std::string>() +
                    "' does not match its manifest shape");
    ckpt.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

} // namespace liss
