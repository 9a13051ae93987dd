#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ahpq/fixed_point.hpp"

namespace ahpq::fxp {

namespace {

using nlohmann::json;

ProfileOrigin parse_origin(const std::string& s) {
  if (s == "UQ") return ProfileOrigin::kUq;
  if (s == "AHPQ") return ProfileOrigin::kAhpq;
  if (s == "custom") return ProfileOrigin::kCustom;
  throw std::invalid_argument("malformed profile: unknown origin '" + s + "'");
}

ProfileScope parse_scope(const std::string& s) {
  if (s == "nna-amp") return ProfileScope::kNnaAmp;
  if (s == "hf-amp") return ProfileScope::kHfAmp;
  throw std::invalid_argument("malformed profile: unknown scope '" + s + "'");
}

}  // namespace

QuantProfile profile_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed profile: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("variables") || !doc["variables"].is_array()) {
    throw std::invalid_argument("malformed profile: expected an object with 'variables'");
  }
  if (doc.value("version", 0) != 1) {
    throw std::invalid_argument("malformed profile: unsupported version");
  }
  QuantProfile profile(parse_scope(doc.value("scope", std::string("nna-amp"))),
                       parse_origin(doc.value("origin", std::string("custom"))));
  profile.id = doc.value("id", std::string());

  std::set<int> seen;
  for (const auto& v : doc["variables"]) {
    if (!v.is_object() || !v.contains("k") || !v.contains("p") || !v.contains("q")) {
      throw std::invalid_argument("malformed profile: variable record needs k, p, q");
    }
    const int k = v["k"].get<int>();
    if (k < 1 || k > kNumVariables) {
      throw std::invalid_argument("malformed profile: k out of range");
    }
    if (!seen.insert(k).second) {
      throw std::invalid_argument("duplicate k=" + std::to_string(k));
    }
    if (v.contains("name") && v["name"].get<std::string>() != variable_name(k)) {
      throw std::invalid_argument("malformed profile: k=" + std::to_string(k) +
                                  " is named '" + std::string(variable_name(k)) + "'");
    }
    profile.set(k, QuantScheme(v["p"].get<int>(), v["q"].get<int>()));
  }
  profile.validate();
  return profile;
}

std::string profile_to_json(const QuantProfile& profile) {
  json doc;
  doc["version"] = 1;
  doc["origin"] = std::string(to_string(profile.origin()));
  doc["scope"] = std::string(to_string(profile.scope()));
  if (!profile.id.empty()) doc["id"] = profile.id;
  json vars = json::array();
  for (int k = 1; k <= kNumVariables; ++k) {
    if (!profile.has(k)) continue;
    vars.push_back({{"k", k},
                    {"name", std::string(variable_name(k))},
                    {"p", profile.at(k).p()},
                    {"q", profile.at(k).q()}});
  }
  doc["variables"] = std::move(vars);
  return doc.dump(2) + "\n";
}

QuantProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  QuantProfile profile = profile_from_json(buf.str());
  if (profile.id.empty()) {
    const auto slash = path.find_last_of('/');
    profile.id = path.substr(slash == std::string::npos ? 0 : slash + 1);
  }
  return profile;
}

void save_profile(const QuantProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile " + path);
  out << profile_to_json(profile);
}

std::string bundled_profile_path(std::string_view file_name) {
  return std::string(AHPQ_PROFILE_DIR) + "/" + std::string(file_name);
}

}  // namespace ahpq::fxp
