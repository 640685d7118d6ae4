#include "stealsim/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace stealsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(double v) { return std::isnan(v) ? std::string() : fmt17(v); }

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_char(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw config_error("cannot parse number '" + tok + "' in " + what);
  }
}

long long parse_int(const std::string& tok, const std::string& what) {
  try {
    size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw config_error("cannot parse integer '" + tok + "' in " + what);
  }
}

std::uint64_t parse_u64(const std::string& tok, const std::string& what) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw config_error("cannot parse unsigned integer '" + tok + "' in " + what);
  }
}

// --- token <-> object mappings ---------------------------------------------

TargetModel parse_target(const std::vector<std::string>& t) {
  if (t.empty()) throw config_error("empty target spec");
  const std::string& kind = t[0];
  if (kind == "poly_quadratic") {
    if (t.size() != 1) throw config_error("poly_quadratic takes no parameters");
    return make_poly_scenario_target();
  }
  if (kind == "poly") {
    if (t.size() < 2) throw config_error("poly needs coefficients");
    PolynomialModel m;
    m.coeffs.resize(static_cast<int>(t.size()) - 1);
    for (size_t i = 1; i < t.size(); ++i)
      m.coeffs[static_cast<int>(i) - 1] = parse_double(t[i], "target");
    return m;
  }
  if (kind == "linear") {
    if (t.size() < 2) throw config_error("linear needs coefficients");
    LinearModel m;
    m.beta.resize(static_cast<int>(t.size()) - 1);
    for (size_t i = 1; i < t.size(); ++i)
      m.beta[static_cast<int>(i) - 1] = parse_double(t[i], "target");
    return m;
  }
  if (kind == "highdim_linear") {
    if (t.size() != 1) throw config_error("highdim_linear takes no parameters");
    return make_highdim_model();
  }
  if (kind == "halfspace") {
    std::vector<double> vals;
    double intercept = 0.0;
    for (size_t i = 1; i < t.size(); ++i) {
      if (t[i] == "intercept") {
        if (i + 2 != t.size()) throw config_error("halfspace intercept takes one value");
        intercept = parse_double(t[i + 1], "target");
        break;
      }
      vals.push_back(parse_double(t[i], "target"));
    }
    if (vals.empty()) throw config_error("halfspace needs coefficients");
    LinearClassifierModel m;
    m.beta = Eigen::Map<Vector>(vals.data(), static_cast<int>(vals.size()));
    m.intercept = intercept;
    return m;
  }
  if (kind == "prob_softmax") {
    if (t.size() != 4) throw config_error("prob_softmax takes: dim classes seed");
    int d = static_cast<int>(parse_int(t[1], "target"));
    int K = static_cast<int>(parse_int(t[2], "target"));
    std::uint64_t s = parse_u64(t[3], "target");
    return make_prob_classifier(d, K, s);
  }
  throw config_error("unknown target kind '" + kind + "'");
}

std::string serialize_target(const TargetModel& m) {
  if (const auto* p = std::get_if<PolynomialModel>(&m)) {
    std::string out = "poly";
    for (int i = 0; i < p->coeffs.size(); ++i) out += " " + fmt17(p->coeffs[i]);
    return out;
  }
  if (const auto* l = std::get_if<LinearModel>(&m)) {
    const Vector highdim = make_highdim_model().beta;
    if (l->beta.size() == highdim.size() && l->beta == highdim) return "highdim_linear";
    std::string out = "linear";
    for (int i = 0; i < l->beta.size(); ++i) out += " " + fmt17(l->beta[i]);
    return out;
  }
  if (const auto* c = std::get_if<LinearClassifierModel>(&m)) {
    std::string out = "halfspace";
    for (int i = 0; i < c->beta.size(); ++i) out += " " + fmt17(c->beta[i]);
    if (c->intercept != 0.0) out += " intercept " + fmt17(c->intercept);
    return out;
  }
  const auto& p = std::get<ProbClassifierModel>(m);
  if (p.gen_classes < 2)
    throw config_error("hand-built probability targets have no config token form");
  return "prob_softmax " + std::to_string(p.gen_dim) + " " + std::to_string(p.gen_classes) + " " +
         std::to_string(p.gen_seed);
}

QueryDistribution parse_distribution(const std::vector<std::string>& t) {
  if (t.empty()) throw config_error("empty distribution spec");
  const std::string& kind = t[0];
  if (kind == "beta") {
    if (t.size() != 3) throw config_error("beta takes: alpha beta");
    return BetaDist{parse_double(t[1], "distribution"), parse_double(t[2], "distribution")};
  }
  if (kind == "uniform") {
    if (t.size() != 2) throw config_error("uniform takes: dim");
    return UniformCube{static_cast<int>(parse_int(t[1], "distribution"))};
  }
  if (kind == "normal") {
    if (t.size() != 2) throw config_error("normal takes: dim");
    return StandardNormal{static_cast<int>(parse_int(t[1], "distribution"))};
  }
  if (kind == "highdim") {
    if (t.size() != 1) throw config_error("highdim takes no parameters");
    return HighDimGrouped{};
  }
  throw config_error("unknown distribution kind '" + kind + "'");
}

std::string serialize_distribution(const QueryDistribution& d) {
  if (const auto* b = std::get_if<BetaDist>(&d))
    return "beta " + fmt17(b->alpha) + " " + fmt17(b->beta);
  if (const auto* u = std::get_if<UniformCube>(&d)) return "uniform " + std::to_string(u->dim);
  if (const auto* s = std::get_if<StandardNormal>(&d)) return "normal " + std::to_string(s->dim);
  return "highdim";
}

AttackSpec parse_attack(const std::vector<std::string>& t) {
  if (t.empty()) throw config_error("empty attack spec");
  const std::string& kind = t[0];
  if (kind == "poly_gic") {
    if (t.size() != 2 || (t[1] != "aic" && t[1] != "bic"))
      throw config_error("poly_gic takes: aic|bic");
    PolyGicAttack a;
    a.penalty = t[1] == "aic" ? PolyGicAttack::Penalty::Aic : PolyGicAttack::Penalty::Bic;
    return a;
  }
  if (kind == "knn_best") {
    if (t.size() != 1) throw config_error("knn_best takes no parameters");
    return KnnAttack{};
  }
  if (kind == "knn") {
    if (t.size() != 2) throw config_error("knn takes: k");
    KnnAttack a;
    a.k = static_cast<int>(parse_int(t[1], "attack"));
    return a;
  }
  if (kind == "lasso_cv") {
    if (t.size() != 1) throw config_error("lasso_cv takes no parameters");
    return LassoAttack{};
  }
  if (kind == "enet_cv") {
    if (t.size() != 1) throw config_error("enet_cv takes no parameters");
    LassoAttack a;
    a.elastic_net = true;
    return a;
  }
  if (kind == "linear_erm") {
    if (t.size() != 1) throw config_error("linear_erm takes no parameters");
    return LinearErmAttack{};
  }
  if (kind == "none") {
    if (t.size() != 1) throw config_error("none takes no parameters");
    return NoAttack{};
  }
  throw config_error("unknown attack kind '" + kind + "'");
}

std::string serialize_attack(const AttackSpec& a) {
  if (const auto* k = std::get_if<KnnAttack>(&a))
    return k->k ? "knn " + std::to_string(*k->k) : std::string("knn_best");
  if (const auto* p = std::get_if<PolyGicAttack>(&a))
    return p->penalty == PolyGicAttack::Penalty::Aic ? "poly_gic aic" : "poly_gic bic";
  if (const auto* l = std::get_if<LassoAttack>(&a)) return l->elastic_net ? "enet_cv" : "lasso_cv";
  if (std::holds_alternative<LinearErmAttack>(a)) return "linear_erm";
  return "none";
}

DefenseSpec parse_defense(const std::vector<std::string>& t) {
  if (t.empty()) throw config_error("empty defense spec");
  const std::string& kind = t[0];
  auto arity = [&](size_t lo, size_t hi, const char* usage) {
    if (t.size() < lo || t.size() > hi)
      throw config_error(std::string("defense usage: ") + usage);
  };
  if (kind == "no_defense") {
    arity(1, 1, "no_defense");
    return NoDefense{};
  }
  if (kind == "iid_noise") {
    arity(1, 1, "iid_noise");
    return IidNoising{};
  }
  if (kind == "constant_noise") {
    arity(1, 2, "constant_noise [+|-]");
    ConstantNoising c;
    if (t.size() == 2) {
      if (t[1] == "+")
        c.sign = 1;
      else if (t[1] == "-")
        c.sign = -1;
      else
        throw config_error("constant_noise sign must be + or -");
    }
    return c;
  }
  if (kind == "long_range") {
    arity(2, 2, "long_range <gamma>");
    return LongRangeNoising{parse_double(t[1], "defense")};
  }
  if (kind == "order_disguise") {
    arity(1, 2, "order_disguise [<order>]");
    OrderDisguiseDefense d;
    if (t.size() == 2) d.target_order = static_cast<int>(parse_int(t[1], "defense"));
    return d;
  }
  if (kind == "mvp") {
    arity(2, 2, "mvp <rho>");
    return MvpDefense{parse_double(t[1], "defense")};
  }
  if (kind == "random_shuffle") {
    arity(2, 2, "random_shuffle <xi>");
    return RandomShuffleDefense{parse_double(t[1], "defense")};
  }
  if (kind == "label_flip") {
    arity(1, 1, "label_flip");
    return LabelFlipDefense{};
  }
  if (kind == "boundary_shift") {
    arity(2, 2, "boundary_shift <shift>|auto");
    BoundaryShiftDefense d;
    if (t[1] != "auto") d.shift = parse_double(t[1], "defense");
    return d;
  }
  if (kind == "misleading_shift") {
    arity(2, 2, "misleading_shift <delta>");
    return MisleadingShiftDefense{parse_double(t[1], "defense")};
  }
  throw config_error("unknown defense kind '" + kind + "'");
}

std::string serialize_defense(const DefenseSpec& d) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NoDefense>) return "no_defense";
        if constexpr (std::is_same_v<T, IidNoising>) return "iid_noise";
        if constexpr (std::is_same_v<T, ConstantNoising>)
          return s.sign >= 0 ? "constant_noise +" : "constant_noise -";
        if constexpr (std::is_same_v<T, LongRangeNoising>) return "long_range " + fmt17(s.gamma);
        if constexpr (std::is_same_v<T, OrderDisguiseDefense>)
          return s.target_order ? "order_disguise " + std::to_string(*s.target_order)
                               : std::string("order_disguise");
        if constexpr (std::is_same_v<T, MvpDefense>) return "mvp " + fmt17(s.rho);
        if constexpr (std::is_same_v<T, RandomShuffleDefense>)
          return "random_shuffle " + fmt17(s.xi);
        if constexpr (std::is_same_v<T, LabelFlipDefense>) return "label_flip";
        if constexpr (std::is_same_v<T, BoundaryShiftDefense>)
          return s.shift ? "boundary_shift " + fmt17(*s.shift)
                         : std::string("boundary_shift auto");
        if constexpr (std::is_same_v<T, MisleadingShiftDefense>)
          return "misleading_shift " + fmt17(s.delta);
      },
      d);
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& text) {
  ScenarioConfig cfg;
  cfg.defenses.clear();
  bool saw_schema = false;
  bool in_scenario = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = line;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s == "[scenario]") {
        in_scenario = true;
        continue;
      }
      throw config_error("unknown section " + s + " at line " + std::to_string(lineno));
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw config_error("expected key = value at line " + std::to_string(lineno));
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key == "schema_version") {
      long long v = parse_int(value, "schema_version");
      if (v != kConfigSchemaVersion)
        throw config_error("unsupported schema_version " + value + " (expected " +
                           std::to_string(kConfigSchemaVersion) + ")");
      cfg.schema_version = static_cast<int>(v);
      saw_schema = true;
      continue;
    }
    if (!in_scenario)
      throw config_error("key '" + key + "' appears before [scenario] at line " +
                         std::to_string(lineno));
    if (key == "id") {
      cfg.id = value;
    } else if (key == "target") {
      cfg.target = parse_target(split_ws(value));
    } else if (key == "distribution") {
      cfg.dist = parse_distribution(split_ws(value));
    } else if (key == "attack") {
      cfg.attack = parse_attack(split_ws(value));
    } else if (key == "defense") {
      cfg.defenses.push_back(parse_defense(split_ws(value)));
    } else if (key == "n") {
      cfg.n_values.clear();
      for (const auto& tok : split_ws(value))
        cfg.n_values.push_back(static_cast<int>(parse_int(tok, "n")));
    } else if (key == "u") {
      cfg.u_values.clear();
      for (const auto& tok : split_ws(value)) cfg.u_values.push_back(parse_double(tok, "u"));
    } else if (key == "replicates") {
      cfg.replicates = static_cast<int>(parse_int(value, "replicates"));
    } else if (key == "n_test") {
      cfg.n_test = static_cast<int>(parse_int(value, "n_test"));
    } else if (key == "seed") {
      cfg.seed = parse_u64(value, "seed");
    } else if (key == "out") {
      cfg.output_dir = value;
    } else {
      throw config_error("unknown key '" + key + "' at line " + std::to_string(lineno));
    }
  }
  if (!saw_schema) throw config_error("config is missing schema_version");
  return cfg;
}

std::string serialize_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out << "schema_version = " << cfg.schema_version << "\n\n[scenario]\n";
  out << "id = " << cfg.id << "\n";
  out << "target = " << serialize_target(cfg.target) << "\n";
  out << "distribution = " << serialize_distribution(cfg.dist) << "\n";
  out << "attack = " << serialize_attack(cfg.attack) << "\n";
  for (const auto& d : cfg.defenses) out << "defense = " << serialize_defense(d) << "\n";
  out << "n =";
  for (int n : cfg.n_values) out << " " << n;
  out << "\nu =";
  for (double u : cfg.u_values) out << " " << fmt17(u);
  out << "\nreplicates = " << cfg.replicates << "\n";
  out << "n_test = " << cfg.n_test << "\n";
  out << "seed = " << cfg.seed << "\n";
  if (!cfg.output_dir.empty()) out << "out = " << cfg.output_dir << "\n";
  return out.str();
}

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.id.empty()) throw config_error("scenario id must not be empty");
  for (char c : cfg.id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      throw config_error("scenario id may contain only letters, digits, '_' and '-'");
  if (cfg.defenses.empty()) throw config_error("scenario needs at least one defense");
  if (cfg.n_values.empty()) throw config_error("scenario needs at least one n value");
  if (cfg.u_values.empty()) throw config_error("scenario needs at least one u value");
  for (const auto& defense : cfg.defenses) {
    for (int n : cfg.n_values) {
      for (double u : cfg.u_values) {
        CellSpec cell;
        cell.model = cfg.target;
        cell.dist = cfg.dist;
        cell.defense = defense;
        cell.attack = cfg.attack;
        cell.n = n;
        cell.u_n = u;
        cell.n_test = cfg.n_test;
        cell.replicates = cfg.replicates;
        cell.master_seed = cfg.seed;
        validate_cell(cell);
        if (const auto* bs = std::get_if<BoundaryShiftDefense>(&defense);
            bs && !bs->shift && !(u >= 0.0 && u < 0.5))
          throw config_error("auto boundary shift needs budgets in [0, 0.5)");
      }
    }
  }
}

const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> list = {
      {"poly_defense_vs_n",
       "schema_version = 1\n"
       "[scenario]\n"
       "id = poly_defense_vs_n\n"
       "target = poly_quadratic\n"
       "distribution = beta 1 3\n"
       "attack = poly_gic aic\n"
       "defense = no_defense\n"
       "defense = iid_noise\n"
       "defense = long_range 0.2\n"
       "defense = constant_noise +\n"
       "defense = order_disguise\n"
       "n = 20 50 100 200 500\n"
       "u = 0.25\n"
       "replicates = 100\n"
       "n_test = 1000\n"
       "seed = 20240501\n",
       "quadratic target, order-selecting attacker: privacy vs n at budget 0.25"},
      {"poly_defense_vs_u",
       "schema_version = 1\n"
       "[scenario]\n"
       "id = poly_defense_vs_u\n"
       "target = poly_quadratic\n"
       "distribution = beta 1 3\n"
       "attack = poly_gic aic\n"
       "defense = no_defense\n"
       "defense = iid_noise\n"
       "defense = long_range 0.2\n"
       "defense = constant_noise +\n"
       "defense = order_disguise\n"
       "n = 100\n"
       "u = 0.01 0.05 0.1 0.25 0.5 0.75 1.0\n"
       "replicates = 100\n"
       "n_test = 1000\n"
       "seed = 20240502\n",
       "quadratic target, order-selecting attacker: privacy vs budget at n=100"},
      {"highdim_mvp",
       "schema_version = 1\n"
       "[scenario]\n"
       "id = highdim_mvp\n"
       "target = highdim_linear\n"
       "distribution = highdim\n"
       "attack = lasso_cv\n"
       "defense = no_defense\n"
       "defense = iid_noise\n"
       "defense = constant_noise +\n"
       "defense = long_range 0.2\n"
       "defense = mvp 1.0\n"
       "n = 50\n"
       // Budgets are {0.05, 0.1, 0.25, 0.5, 1.0} x Var(f*(X)) = 676.35.
       "u = 33.8175 67.635 169.0875 338.175 676.35\n"
       "replicates = 20\n"
       "n_test = 400\n"
       "seed = 20240503\n",
       "grouped sparse linear target, cross-validated L1 attacker: selection corruption"},
      {"knn_rates",
       "schema_version = 1\n"
       "[scenario]\n"
       "id = knn_rates\n"
       "target = poly_quadratic\n"
       "distribution = uniform 1\n"
       "attack = knn_best\n"
       "defense = no_defense\n"
       "defense = constant_noise +\n"
       "n = 100 200 400 800 1600\n"
       "u = 0.25\n"
       "replicates = 50\n"
       "n_test = 1000\n"
       "seed = 20240504\n",
       "Lipschitz target, best-k nearest-neighbor attacker: privacy decay vs n"},
      {"class_rates",
       "schema_version = 1\n"
       "[scenario]\n"
       "id = class_rates\n"
       "target = halfspace 1 -1\n"
       "distribution = uniform 2\n"
       "attack = linear_erm\n"
       "defense = label_flip\n"
       "defense = boundary_shift auto\n"
       "n = 200 500 1000 2000\n"
       "u = 0.2\n"
       "replicates = 50\n"
       "n_test = 2000\n"
       "seed = 20240505\n",
       "halfspace target, approximate-ERM attacker: label flips vs boundary shifts"},
      {"prob_shift",
       "schema_version = 1\n"
       "[scenario]\n"
       "id = prob_shift\n"
       "target = prob_softmax 4 3 7\n"
       "distribution = normal 4\n"
       "attack = none\n"
       "defense = random_shuffle 0.3\n"
       "defense = misleading_shift 1\n"
       "n = 500\n"
       "u = 0\n"
       "replicates = 20\n"
       "n_test = 1\n"
       "seed = 20240506\n",
       "probability classifier, no attacker: utility cost of the soft-label defenses"},
  };
  return list;
}

ScenarioConfig load_scenario(const std::string& path_or_id) {
  namespace fs = std::filesystem;
  if (fs::exists(path_or_id)) {
    std::ifstream in(path_or_id);
    if (!in) throw config_error("cannot read config file " + path_or_id);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_config(buf.str());
  }
  for (const auto& b : builtin_scenarios())
    if (b.id == path_or_id) return parse_scenario_config(b.text);
  throw config_error("no config file and no built-in scenario named '" + path_or_id + "'");
}

ScenarioResult run_scenario(const ScenarioConfig& config, int jobs) {
  validate_config(config);
  ScenarioResult result;
  result.config = config;
  for (const auto& defense : config.defenses) {
    const std::string label = defense_label(defense);
    for (int n : config.n_values) {
      for (double u : config.u_values) {
        CellSpec cell;
        cell.model = config.target;
        cell.dist = config.dist;
        cell.defense = defense;
        cell.attack = config.attack;
        cell.n = n;
        cell.u_n = u;
        cell.n_test = config.n_test;
        cell.replicates = config.replicates;
        cell.master_seed = config.seed;
        std::vector<ReplicateOutcome> rows = run_cell(cell, jobs);

        SummaryRow sum;
        sum.scenario = config.id;
        sum.defense = label;
        sum.n = n;
        sum.u = u;
        sum.replicates = config.replicates;
        auto aggregate = [](const std::vector<double>& xs, double& mean, double& se) {
          if (xs.empty()) {
            mean = se = kNaN;
            return;
          }
          double m = 0.0;
          for (double x : xs) m += x;
          m /= xs.size();
          double var = 0.0;
          for (double x : xs) var += (x - m) * (x - m);
          var = xs.size() > 1 ? var / (xs.size() - 1.0) : 0.0;
          mean = m;
          se = std::sqrt(var / xs.size());
        };
        std::vector<double> privs, utils, diffs;
        for (int r = 0; r < config.replicates; ++r) {
          RawRow raw;
          raw.scenario = config.id;
          raw.defense = label;
          raw.n = n;
          raw.u = u;
          raw.replicate = r;
          raw.outcome = rows[r];
          if (rows[r].ok()) {
            if (!std::isnan(rows[r].privacy)) privs.push_back(rows[r].privacy);
            if (!std::isnan(rows[r].utility)) utils.push_back(rows[r].utility);
            if (rows[r].sym_diff) diffs.push_back(*rows[r].sym_diff);
          } else {
            ++sum.failed;
          }
          result.raw.push_back(std::move(raw));
        }
        aggregate(privs, sum.privacy_mean, sum.privacy_se);
        aggregate(utils, sum.utility_mean, sum.utility_se);
        aggregate(diffs, sum.symdiff_mean, sum.symdiff_se);
        result.summary.push_back(std::move(sum));
      }
    }
  }
  return result;
}

namespace {

std::string sanitize_error(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

const char* kRawHeader = "scenario,defense,n,u,replicate,privacy,utility,sym_diff,q_hat,k_sel,lambda1,lambda2,error";
const char* kSummaryHeader =
    "scenario,defense,n,u,replicates,failed,privacy_mean,privacy_se,utility_mean,utility_se,"
    "symdiff_mean,symdiff_se";

}  // namespace

std::string write_raw_csv(const std::vector<RawRow>& rows) {
  std::ostringstream out;
  out << kRawHeader << "\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.defense << ',' << r.n << ',' << fmt17(r.u) << ','
        << r.replicate << ',' << fmt_opt(r.outcome.privacy) << ',' << fmt_opt(r.outcome.utility)
        << ',';
    if (r.outcome.sym_diff) out << *r.outcome.sym_diff;
    out << ',';
    if (r.outcome.meta.selected_order) out << *r.outcome.meta.selected_order;
    out << ',';
    if (r.outcome.meta.knn_k) out << *r.outcome.meta.knn_k;
    out << ',';
    if (r.outcome.meta.lambda1) out << fmt17(*r.outcome.meta.lambda1);
    out << ',';
    if (r.outcome.meta.lambda2) out << fmt17(*r.outcome.meta.lambda2);
    out << ',' << sanitize_error(r.outcome.error) << "\n";
  }
  return out.str();
}

std::vector<RawRow> parse_raw_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kRawHeader)
    throw config_error("raw csv header mismatch");
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_char(line, ',');
    if (f.size() != 13) throw config_error("raw csv row has wrong field count");
    RawRow r;
    r.scenario = f[0];
    r.defense = f[1];
    r.n = static_cast<int>(parse_int(f[2], "raw csv"));
    r.u = parse_double(f[3], "raw csv");
    r.replicate = static_cast<int>(parse_int(f[4], "raw csv"));
    r.outcome.privacy = f[5].empty() ? kNaN : parse_double(f[5], "raw csv");
    r.outcome.utility = f[6].empty() ? kNaN : parse_double(f[6], "raw csv");
    if (!f[7].empty()) r.outcome.sym_diff = static_cast<int>(parse_int(f[7], "raw csv"));
    if (!f[8].empty())
      r.outcome.meta.selected_order = static_cast<int>(parse_int(f[8], "raw csv"));
    if (!f[9].empty()) r.outcome.meta.knn_k = static_cast<int>(parse_int(f[9], "raw csv"));
    if (!f[10].empty()) r.outcome.meta.lambda1 = parse_double(f[10], "raw csv");
    if (!f[11].empty()) r.outcome.meta.lambda2 = parse_double(f[11], "raw csv");
    r.outcome.error = f[12];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string write_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << kSummaryHeader << "\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.defense << ',' << r.n << ',' << fmt17(r.u) << ','
        << r.replicates << ',' << r.failed << ',' << fmt_opt(r.privacy_mean) << ','
        << fmt_opt(r.privacy_se) << ',' << fmt_opt(r.utility_mean) << ','
        << fmt_opt(r.utility_se) << ',' << fmt_opt(r.symdiff_mean) << ','
        << fmt_opt(r.symdiff_se) << "\n";
  }
  return out.str();
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kSummaryHeader)
    throw config_error("summary csv header mismatch");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_char(line, ',');
    if (f.size() != 12) throw config_error("summary csv row has wrong field count");
    SummaryRow r;
    r.scenario = f[0];
    r.defense = f[1];
    r.n = static_cast<int>(parse_int(f[2], "summary csv"));
    r.u = parse_double(f[3], "summary csv");
    r.replicates = static_cast<int>(parse_int(f[4], "summary csv"));
    r.failed = static_cast<int>(parse_int(f[5], "summary csv"));
    auto opt = [&](const std::string& s) { return s.empty() ? kNaN : parse_double(s, "summary"); };
    r.privacy_mean = opt(f[6]);
    r.privacy_se = opt(f[7]);
    r.utility_mean = opt(f[8]);
    r.utility_se = opt(f[9]);
    r.symdiff_mean = opt(f[10]);
    r.symdiff_se = opt(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string write_run_outputs(const ScenarioResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::string target_dir = dir;
  if (target_dir.empty())
    target_dir = result.config.output_dir.empty() ? "runs/" + result.config.id
                                                  : result.config.output_dir;
  fs::create_directories(target_dir);
  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(target_dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + name + " in " + target_dir);
    out << content;
  };
  write_file("raw.csv", write_raw_csv(result.raw));
  write_file("summary.csv", write_summary_csv(result.summary));
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize_config(result.config))));
  std::ostringstream manifest;
  manifest << "schema_version = " << result.config.schema_version << "\n"
           << "scenario = " << result.config.id << "\n"
           << "toolkit_version = " << kToolkitVersion << "\n"
           << "seed = " << result.config.seed << "\n"
           << "config_hash = " << hash << "\n";
  write_file("manifest", manifest.str());
  return target_dir;
}

std::string export_figure_data(const std::vector<SummaryRow>& summary,
                               const std::string& figure_id) {
  if (summary.empty()) throw config_error("summary table is empty");
  enum class Axis { N, U } axis;
  bool symdiff = false;
  if (figure_id == "privacy_vs_n") {
    axis = Axis::N;
  } else if (figure_id == "privacy_vs_u") {
    axis = Axis::U;
  } else if (figure_id == "symdiff_vs_u") {
    axis = Axis::U;
    symdiff = true;
  } else {
    throw config_error("unknown figure id '" + figure_id +
                       "' (expected privacy_vs_n, privacy_vs_u, or symdiff_vs_u)");
  }
  // The off-axis grid must be a single value, otherwise cells are ambiguous.
  std::vector<double> off;
  for (const auto& r : summary) {
    double v = axis == Axis::N ? r.u : static_cast<double>(r.n);
    if (std::find(off.begin(), off.end(), v) == off.end()) off.push_back(v);
  }
  if (off.size() != 1)
    throw config_error("figure " + figure_id + " needs a single " +
                       (axis == Axis::N ? std::string("budget") : std::string("sample size")) +
                       " in the summary; found " + std::to_string(off.size()));

  std::vector<std::string> defenses;
  std::vector<double> xs;
  for (const auto& r : summary) {
    if (std::find(defenses.begin(), defenses.end(), r.defense) == defenses.end())
      defenses.push_back(r.defense);
    double x = axis == Axis::N ? static_cast<double>(r.n) : r.u;
    if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());

  std::ostringstream out;
  out << "x,defense,mean,se\n";
  std::vector<std::string> missing;
  for (const auto& d : defenses) {
    for (double x : xs) {
      const SummaryRow* hit = nullptr;
      for (const auto& r : summary) {
        double rx = axis == Axis::N ? static_cast<double>(r.n) : r.u;
        if (r.defense == d && rx == x) {
          hit = &r;
          break;
        }
      }
      double mean = hit ? (symdiff ? hit->symdiff_mean : hit->privacy_mean) : kNaN;
      double se = hit ? (symdiff ? hit->symdiff_se : hit->privacy_se) : kNaN;
      if (!hit || std::isnan(mean)) {
        missing.push_back("(" + d + ", " + fmt17(x) + ")");
        continue;
      }
      out << fmt17(x) << ',' << d << ',' << fmt17(mean) << ',' << fmt17(se) << "\n";
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw config_error("figure " + figure_id + " is missing cells: " + list);
  }
  return out.str();
}

}  // namespace stealsim
