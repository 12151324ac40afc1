#include "pixelseg/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pixelseg/error.hpp"

namespace pixelseg {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     const std::string& config_echo_json) {
  const fs::path target(dir);
  const fs::path tmp = target.string() + ".tmp-" + std::to_string(::getpid());
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  ordered_json manifest;
  manifest["format"] = 1;
  if (!config_echo_json.empty()) {
    ordered_json cfg = ordered_json::parse(config_echo_json, nullptr, false);
    manifest["config"] = cfg.is_discarded() ? ordered_json(config_echo_json) : cfg;
  } else {
    manifest["config"] = ordered_json::object();
  }
  ordered_json plist = ordered_json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    char file[32];
    std::snprintf(file, sizeof(file), "p%04zu.bin", i);
    save_tensor(params[i].second, (tmp / file).string());
    ordered_json entry;
    entry["name"] = params[i].first;
    entry["file"] = file;
    entry["shape"] = params[i].second.shape();
    plist.push_back(std::move(entry));
  }
  manifest["params"] = std::move(plist);
  {
    std::ofstream out(tmp / "manifest.json", std::ios::trunc);
    if (!out) throw FormatError("save_checkpoint: cannot write manifest");
    out << manifest.dump(2) << "\n";
  }
  fs::remove_all(target);
  fs::rename(tmp, target);
}

namespace {

ordered_json read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ordered_json manifest = ordered_json::parse(buf.str(), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("params")) {
    throw FormatError("checkpoint: malformed manifest in " + dir);
  }
  return manifest;
}

}  // namespace

std::string load_checkpoint(const std::string& dir,
                            std::vector<std::pair<std::string, Tensor>>& params) {
  const ordered_json manifest = read_manifest(dir);
  std::map<std::string, const ordered_json*> by_name;
  for (const auto& entry : manifest["params"]) {
    by_name[entry.at("name").get<std::string>()] = &entry;
  }
  for (auto& [name, tensor] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing parameter " + name);
    const std::string file = it->second->at("file").get<std::string>();
    Tensor stored = load_tensor((fs::path(dir) / file).string());
    if (stored.shape() != tensor.shape()) {
      throw FormatError("checkpoint: shape mismatch for " + name + ": stored " +
                        shape_str(stored.shape()) + ", model " + shape_str(tensor.shape()));
    }
    tensor.data() = stored.data();
  }
  return manifest.value("config", ordered_json::object()).dump();
}

std::string read_checkpoint_config(const std::string& dir) {
  return read_manifest(dir).value("config", ordered_json::object()).dump();
}

}  // namespace pixelseg
