#include "ttde/model_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ttde {

namespace {
constexpr const char* kFormat = "ttde-model";
constexpr int kVersion = 1;
}  // namespace

std::string model_to_json(const DensityModel& model) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["d"] = model.dims();
  j["variant"] = std::string(to_string(model.variant()));
  auto& bases = j["bases"] = nlohmann::ordered_json::array();
  for (const auto& b : model.bases()) {
    bases.push_back({{"degree", b.degree()},
                     {"size", b.size()},
                     {"lower", b.lower()},
                     {"upper", b.upper()}});
  }
  auto& cores = j["cores"] = nlohmann::ordered_json::array();
  for (const auto& c : model.alpha().cores()) {
    nlohmann::ordered_json core = nlohmann::ordered_json::array();
    for (Index a = 0; a < c.left_rank(); ++a) {
      nlohmann::ordered_json mid = nlohmann::ordered_json::array();
      for (Index i = 0; i < c.mode_size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Index b = 0; b < c.right_rank(); ++b) row.push_back(c(a, i, b));
        mid.push_back(std::move(row));
      }
      core.push_back(std::move(mid));
    }
    cores.push_back(std::move(core));
  }
  j["normalization"] = model.normalization();
  return j.dump();
}

DensityModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw std::runtime_error("model: unknown format");
    }
    if (j.at("version").get<int>() != kVersion) {
      throw std::runtime_error("model: unsupported version");
    }
    const int d = j.at("d").get<int>();
    const Variant variant = parse_variant(j.at("variant").get<std::string>());
    std::vector<BSplineBasis> bases;
    for (const auto& b : j.at("bases")) {
      bases.emplace_back(b.at("lower").get<double>(), b.at("upper").get<double>(),
                         b.at("size").get<int>(), b.at("degree").get<int>());
    }
    std::vector<TTCore> cores;
    for (const auto& c : j.at("cores")) {
      const auto l = static_cast<Index>(c.size());
      const auto m = l ? static_cast<Index>(c[0].size()) : 0;
      const auto r = m ? static_cast<Index>(c[0][0].size()) : 0;
      TTCore core(l, m, r);
      for (Index a = 0; a < l; ++a) {
        if (static_cast<Index>(c[static_cast<std::size_t>(a)].size()) != m) {
          throw std::runtime_error("model: ragged core");
        }
        for (Index i = 0; i < m; ++i) {
          const auto& row = c[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
          if (static_cast<Index>(row.size()) != r) throw std::runtime_error("model: ragged core");
          for (Index b = 0; b < r; ++b) core(a, i, b) = row[static_cast<std::size_t>(b)].get<double>();
        }
      }
      cores.push_back(std::move(core));
    }
    if (static_cast<int>(cores.size()) != d || static_cast<int>(bases.size()) != d) {
      throw std::runtime_error("model: core or basis count differs from d");
    }
    return DensityModel(TTTensor(std::move(cores)), std::move(bases), variant,
                        j.at("normalization").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
}

void save_model(const std::string& path, const DensityModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << model_to_json(model) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

DensityModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace ttde
