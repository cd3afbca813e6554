#include <bit>
#include <fstream>

#include "json.hpp"
#include "peatsim/neural.hpp"

namespace peatsim::neural {

static_assert(std::endian::native == std::endian::little,
              "checkpoint files are written as little-endian doubles");

void ParameterArchive::put(const std::string& name, std::vector<std::int64_t> shape,
                           std::span<const double> values) {
  if (!entries_.count(name)) order_.push_back(name);
  entries_[name] = Entry{std::move(shape), Vector(values.begin(), values.end())};
}

void ParameterArchive::put(const std::string& name, const Mlp& net) {
  put(name, {static_cast<std::int64_t>(net.parameter_count())}, net.parameters());
}

void ParameterArchive::put_text(const std::string& name, std::string value) {
  texts_[name] = std::move(value);
}

const ParameterArchive::Entry& ParameterArchive::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

void ParameterArchive::get_into(const std::string& name, std::span<double> out) const {
  const Entry& e = get(name);
  if (e.values.size() != out.size()) {
    throw DimensionError("checkpoint tensor '" + name + "' has the wrong size");
  }
  std::copy(e.values.begin(), e.values.end(), out.begin());
}

void ParameterArchive::get_into(const std::string& name, Mlp& net) const {
  get_into(name, net.parameters());
}

const std::string& ParameterArchive::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw ConfigError("checkpoint has no field '" + name + "'");
  return it->second;
}

void ParameterArchive::save(const std::filesystem::path& stem) const {
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw ConfigError("cannot write " + bin_path.string());
  nlohmann::json manifest;
  manifest["format"] = "f64-le";
  manifest["tensors"] = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& name : order_) {
    const Entry& e = entries_.at(name);
    bin.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", e.shape},
                                   {"offset", offset},
                                   {"count", e.values.size()}});
    offset += static_cast<std::int64_t>(e.values.size());
  }
  manifest["fields"] = texts_;
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw ConfigError("cannot write " + json_path.string());
  js << manifest.dump(2) << '\n';
}

ParameterArchive ParameterArchive::load(const std::filesystem::path& stem) {
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw ConfigError("cannot read " + json_path.string());
  const nlohmann::json manifest = nlohmann::json::parse(js);
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw ConfigError("cannot read " + bin_path.string());

  ParameterArchive archive;
  for (const auto& t : manifest.at("tensors")) {
    const auto count = t.at("count").get<std::size_t>();
    Vector values(count);
    bin.seekg(static_cast<std::streamoff>(t.at("offset").get<std::int64_t>() * sizeof(double)));
    bin.read(reinterpret_cast<char*>(values.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!bin) throw ConfigError("truncated checkpoint " + bin_path.string());
    archive.put(t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::int64_t>>(),
                values);
  }
  if (manifest.contains("fields")) {
    for (auto it = manifest["fields"].begin(); it != manifest["fields"].end(); ++it) {
      archive.put_text(it.key(), it.value().get<std::string>());
    }
  }
  return archive;
}

}  // namespace peatsim::neural
