#pragma once

// Plain-text MetaPosterior artifact:
//
//   pacmeta-metaposterior v1 d=<D> kappa_rho=<x> kappa_pi=<x>
//   model <linear|mlp1> <input_dim> <hidden_dim> <num_classes>
//   theta0 <2D values>
//   theta1 <2D values>
//
// Values use shortest round-trip decimals, so save/load is bit-exact.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pacmeta/csv.hpp"
#include "pacmeta/error.hpp"
#include "pacmeta/metalearn.hpp"
#include "pacmeta/model.hpp"

namespace pacmeta {

inline constexpr const char* kMetaPosteriorMagic = "pacmeta-metaposterior";
inline constexpr int kMetaPosteriorVersion = 1;

struct MetaPosteriorArtifact {
  MetaPosterior rho;
  MetaPrior pi;
  ModelArchitecture arch;

  bool operator==(const MetaPosteriorArtifact& o) const {
    return rho == o.rho && pi.kappa_pi == o.pi.kappa_pi && arch.kind == o.arch.kind &&
           arch.input_dim == o.arch.input_dim && arch.hidden_dim == o.arch.hidden_dim &&
           arch.num_classes == o.arch.num_classes;
  }
};

inline std::string serialize(const MetaPosteriorArtifact& a) {
  a.rho.validate();
  detail::require(a.rho.weight_dim() == a.arch.parameter_count(), "serialize: meta-posterior does not match architecture");
  std::string out = std::string(kMetaPosteriorMagic) + " v" + std::to_string(kMetaPosteriorVersion) +
                    " d=" + std::to_string(a.rho.weight_dim()) + " kappa_rho=" + format_double(a.rho.kappa_rho) +
                    " kappa_pi=" + format_double(a.pi.kappa_pi) + "\n";
  out += std::string("model ") + to_string(a.arch.kind) + " " + std::to_string(a.arch.input_dim) + " " +
         std::to_string(a.arch.hidden_dim) + " " + std::to_string(a.arch.num_classes) + "\n";
  auto row = [&](const char* name, const std::vector<double>& v) {
    out += name;
    for (double x : v) out += " " + format_double(x);
    out += "\n";
  };
  row("theta0", a.rho.theta0);
  row("theta1", a.rho.theta1);
  return out;
}

namespace detail {

inline double parse_exact(const std::string& token, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DomainError("artifact: bad number '" + token + "' in " + what);
  }
  return v;
}

inline std::string expect_field(std::istringstream& in, const std::string& key) {
  std::string tok;
  if (!(in >> tok) || tok.rfind(key + "=", 0) != 0) throw DomainError("artifact: expected field '" + key + "='");
  return tok.substr(key.size() + 1);
}

}  // namespace detail

inline MetaPosteriorArtifact deserialize(const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  MetaPosteriorArtifact a;

  if (!std::getline(lines, line)) throw DomainError("artifact: empty file");
  std::istringstream head(line);
  std::string magic, version;
  head >> magic >> version;
  if (magic != kMetaPosteriorMagic) throw DomainError("artifact: not a meta-posterior file");
  if (version != "v" + std::to_string(kMetaPosteriorVersion)) {
    throw DomainError("artifact: unsupported version '" + version + "'");
  }
  const std::size_t d = std::stoul(detail::expect_field(head, "d"));
  a.rho.kappa_rho = detail::parse_exact(detail::expect_field(head, "kappa_rho"), "header");
  a.pi.kappa_pi = detail::parse_exact(detail::expect_field(head, "kappa_pi"), "header");

  if (!std::getline(lines, line)) throw DomainError("artifact: missing model line");
  std::istringstream model(line);
  std::string tag, kind;
  model >> tag >> kind >> a.arch.input_dim >> a.arch.hidden_dim >> a.arch.num_classes;
  if (tag != "model" || !model) throw DomainError("artifact: malformed model line");
  a.arch.kind = parse_model_kind(kind);

  auto read_row = [&](const char* name) {
    if (!std::getline(lines, line)) throw DomainError(std::string("artifact: missing ") + name + " row");
    std::istringstream row(line);
    std::string t;
    row >> t;
    if (t != name) throw DomainError(std::string("artifact: expected ") + name + " row");
    std::vector<double> v;
    while (row >> t) v.push_back(detail::parse_exact(t, name));
    if (v.size() != 2 * d) throw DomainError(std::string("artifact: ") + name + " has wrong length");
    return v;
  };
  a.rho.theta0 = read_row("theta0");
  a.rho.theta1 = read_row("theta1");
  a.rho.validate();
  a.arch.validate();
  detail::require(a.arch.parameter_count() == d, "artifact: model does not match dimension d");
  return a;
}

inline void save_artifact(const std::string& path, const MetaPosteriorArtifact& a) { write_atomic(path, serialize(a)); }

inline MetaPosteriorArtifact load_artifact(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open meta-posterior artifact '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace pacmeta
