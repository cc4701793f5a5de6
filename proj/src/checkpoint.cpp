#include "msga/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "msga/error.hpp"
#include "msga/nst.hpp"

namespace msga {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, const ParameterList& params) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  for (const auto& p : params) {
    const std::string file = p.name + ".nst";
    nst::save(dir / file, p.tensor);
    std::string shape = shape_str(p.tensor.shape());
    shape = shape.substr(1, shape.size() - 2);
    manifest << p.name << ' ' << file << ' ' << shape << '\n';
  }
}

void load_checkpoint(const fs::path& dir, const ParameterList& params) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("no manifest.txt in checkpoint " + dir.string());
  std::map<std::string, std::string> files;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, file, shape;
    if (!(ls >> name >> file >> shape)) throw FormatError("malformed manifest line: " + line);
    files[name] = file;
  }

  std::vector<std::string> problems;
  std::vector<std::pair<Tensor, Tensor>> loaded;
  for (const auto& p : params) {
    auto it = files.find(p.name);
    if (it == files.end()) {
      problems.push_back("missing " + p.name);
      continue;
    }
    Tensor t = nst::load(dir / it->second);
    if (t.shape() != p.tensor.shape()) {
      problems.push_back(p.name + " has shape " + shape_str(t.shape()) + ", model expects " +
                         shape_str(p.tensor.shape()));
    }
    loaded.emplace_back(p.tensor, t);
    files.erase(it);
  }
  for (const auto& [name, file] : files) problems.push_back("unexpected " + name);
  if (!problems.empty()) {
    std::string msg = "checkpoint " + dir.string() + " is incompatible with the model:";
    for (const auto& s : problems) msg += "\n  " + s;
    throw DataError(msg);
  }
  for (auto& [dst, src] : loaded) std::copy(src.values().begin(), src.values().end(), dst.values().begin());
}

}  // namespace msga
