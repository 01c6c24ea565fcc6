#include "moelab/model/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "moelab/errors.hpp"

namespace moelab::model {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'O', 'E', 'L', 'A', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = model.config();
  header["init_seed"] = model.init_seed();
  header["params"] = nlohmann::json::array();
  for (const auto& p : model.params()) header["params"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  const std::string text = header.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params()) {
      out.write(reinterpret_cast<const char*>(p.value.data().data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw SchemaError("not a checkpoint: " + path.string());
  if (auto v = get<std::uint32_t>(in); v != kVersion) {
    throw SchemaError("unsupported checkpoint version " + std::to_string(v));
  }
  const auto len = get<std::uint64_t>(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw SchemaError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad checkpoint header: ") + e.what());
  }
  Model model(header.at("config").get<ModelConfig>(), header.at("init_seed").get<std::uint64_t>());
  const auto& listed = header.at("params");
  if (listed.size() != model.params().size()) throw SchemaError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < listed.size(); ++i) {
    auto& p = model.params()[i];
    if (listed[i].at("name").get<std::string>() != p.name ||
        listed[i].at("shape").get<ad::Shape>() != p.value.shape()) {
      throw SchemaError("checkpoint parameter " + std::to_string(i) + " does not match the config");
    }
    auto dst = p.value.mutable_data();
    if (!in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(double)))) {
      throw SchemaError("truncated checkpoint data");
    }
    p.value.check_finite(p.name);
  }
  return model;
}

}  // namespace moelab::model
