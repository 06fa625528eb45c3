#include "diffcdr/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace diffcdr {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_atomic(const fs::path& path, const nlohmann::json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

nlohmann::json params_to_json(const ParamStore& store) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& name : store.names()) {
    const auto& t = store.value(name);
    params[name] = {{"shape", t.shape()}, {"data", t.values()}};
  }
  return {{"format_version", kCheckpointFormatVersion}, {"params", params}};
}

ParamStore params_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw CheckpointError("checkpoint lacks format_version");
  }
  if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format_version " + doc.at("format_version").dump());
  }
  ParamStore store;
  for (const auto& [name, entry] : doc.at("params").items()) {
    store.add(name, Tensor(entry.at("shape").get<Shape>(), entry.at("data").get<std::vector<double>>()));
  }
  return store;
}

void save_params(const fs::path& path, const ParamStore& store) { write_json_atomic(path, params_to_json(store)); }

ParamStore load_params(const fs::path& path) {
  if (!fs::exists(path)) throw CheckpointError("missing checkpoint " + path.string());
  return params_from_json(read_json(path));
}

void load_params_into(const fs::path& path, ParamStore& store) {
  auto loaded = load_params(path);
  if (loaded.names() != store.names()) throw CheckpointError(path.string() + ": parameter names differ from model");
  for (const auto& name : store.names()) {
    const auto& src = loaded.value(name);
    if (src.shape() != store.value(name).shape()) {
      throw CheckpointError(path.string() + ": '" + name + "' has shape " + shape_str(src.shape()) +
                            ", model expects " + shape_str(store.value(name).shape()));
    }
    store.mutable_value(name) = src;
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace diffcdr
