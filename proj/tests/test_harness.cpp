#include <doctest.h>

#include "stealsim/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace stealsim;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ScenarioConfig tiny_config() {
  ScenarioConfig cfg;
  cfg.id = "tiny";
  cfg.target = make_poly_scenario_target();
  cfg.dist = BetaDist{1.0, 3.0};
  cfg.attack = PolyGicAttack{};
  cfg.defenses = {NoDefense{}, ConstantNoising{}};
  cfg.n_values = {30};
  cfg.u_values = {0.25};
  cfg.replicates = 2;
  cfg.n_test = 50;
  cfg.seed = 99;
  return cfg;
}

// A unique scratch directory per test run, removed eagerly at the start so a
// crashed earlier run cannot leak stale files into assertions.
fs::path scratch_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / ("stealsim_test_" + leaf);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config round-trips through serialize and parse for every token kind") {
    std::vector<ScenarioConfig> cases;

    ScenarioConfig a;
    a.id = "roundtrip-a";
    PolynomialModel pm;
    pm.coeffs = Vector(3);
    pm.coeffs << 1.0, -4.0, 4.0;
    a.target = pm;
    a.dist = BetaDist{1.5, 2.25};
    a.attack = PolyGicAttack{};
    a.defenses = {NoDefense{},        IidNoising{},          ConstantNoising{},
                  ConstantNoising{-1}, LongRangeNoising{0.2}, OrderDisguiseDefense{}};
    OrderDisguiseDefense od;
    od.target_order = 7;
    a.defenses.push_back(od);
    a.n_values = {20, 50, 100};
    a.u_values = {0.1, 0.25};
    a.replicates = 4;
    a.n_test = 123;
    a.seed = 424242;
    a.output_dir = "out/custom";
    cases.push_back(a);

    ScenarioConfig b;
    b.id = "roundtrip-b";
    b.target = make_highdim_model();
    b.dist = HighDimGrouped{};
    LassoAttack enet;
    enet.elastic_net = true;
    b.attack = enet;
    b.defenses = {MvpDefense{0.5}, IidNoising{}};
    b.n_values = {50};
    b.u_values = {33.8175};
    b.replicates = 1;
    b.seed = 7;
    cases.push_back(b);

    ScenarioConfig c;
    c.id = "roundtrip-c";
    LinearClassifierModel cls;
    cls.beta = Vector(2);
    cls.beta << 1.0, -1.0;
    cls.intercept = 0.25;
    c.target = cls;
    c.dist = UniformCube{2};
    c.attack = LinearErmAttack{};
    BoundaryShiftDefense fixed_shift;
    fixed_shift.shift = -0.125;
    c.defenses = {LabelFlipDefense{}, BoundaryShiftDefense{}, fixed_shift};
    c.n_values = {200};
    c.u_values = {0.2};
    c.replicates = 2;
    c.seed = 5;
    cases.push_back(c);

    ScenarioConfig d;
    d.id = "roundtrip-d";
    d.target = make_prob_classifier(4, 3, 7);
    d.dist = StandardNormal{4};
    d.attack = NoAttack{};
    d.defenses = {RandomShuffleDefense{0.3}, MisleadingShiftDefense{1.0}};
    d.n_values = {100};
    d.u_values = {0.0};
    d.replicates = 1;
    d.seed = 11;
    cases.push_back(d);

    ScenarioConfig e;
    e.id = "roundtrip-e";
    LinearModel lin;
    lin.beta = Vector(2);
    lin.beta << 0.5, 2.0;
    e.target = lin;
    e.dist = UniformCube{2};
    KnnAttack fixed_k;
    fixed_k.k = 9;
    e.attack = fixed_k;
    e.defenses = {NoDefense{}};
    e.n_values = {40};
    e.u_values = {0.1};
    e.seed = 3;
    cases.push_back(e);

    ScenarioConfig f;
    f.id = "roundtrip-f";
    f.target = make_poly_scenario_target();
    f.dist = BetaDist{1.0, 3.0};
    f.attack = KnnAttack{};  // best-k
    f.defenses = {ConstantNoising{}};
    f.n_values = {60};
    f.u_values = {0.25};
    f.seed = 2;
    cases.push_back(f);

    ScenarioConfig g;
    g.id = "roundtrip-g";
    g.target = make_highdim_model();
    g.dist = HighDimGrouped{};
    g.attack = LassoAttack{};  // plain lasso
    g.defenses = {LongRangeNoising{0.4}};
    g.n_values = {50};
    g.u_values = {67.635};
    g.seed = 1;
    cases.push_back(g);

    for (const ScenarioConfig& cfg : cases) {
      CAPTURE(cfg.id);
      const std::string text = serialize_config(cfg);
      const ScenarioConfig back = parse_scenario_config(text);
      // Serialization is canonical: a second round trip reproduces the text
      // byte for byte, which pins every token's parse/serialize pair.
      CHECK(serialize_config(back) == text);
      CHECK(back.id == cfg.id);
      CHECK(back.schema_version == kConfigSchemaVersion);
      CHECK(back.n_values == cfg.n_values);
      CHECK(back.u_values == cfg.u_values);
      CHECK(back.replicates == cfg.replicates);
      CHECK(back.n_test == cfg.n_test);
      CHECK(back.seed == cfg.seed);
      CHECK(back.output_dir == cfg.output_dir);
      CHECK(back.defenses.size() == cfg.defenses.size());
      for (size_t i = 0; i < cfg.defenses.size(); ++i)
        CHECK(defense_label(back.defenses[i]) == defense_label(cfg.defenses[i]));
    }
  }

  TEST_CASE("parse errors carry the offending line number") {
    auto expect_error = [](const std::string& text, const std::string& needle) {
      try {
        parse_scenario_config(text);
        FAIL_CHECK("expected config_error for: " << needle);
      } catch (const config_error& e) {
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
      }
    };
    expect_error("schema_version = 1\n[scenario]\nid = x\nbogus_key = 3\n", "line 4");
    expect_error("schema_version = 1\n[scenario]\nid = x\nbogus_key = 3\n", "bogus_key");
    expect_error("schema_version = 1\n[mystery]\n", "line 2");
    expect_error("schema_version = 1\nid = x\n", "before [scenario]");
    expect_error("schema_version = 1\n[scenario]\nthis line has no equals sign\n", "line 3");
    expect_error("[scenario]\nid = x\n", "schema_version");
    expect_error("schema_version = 2\n[scenario]\nid = x\n", "schema_version");
    expect_error("schema_version = 1\n[scenario]\ntarget = warp_drive\n", "warp_drive");
    expect_error("schema_version = 1\n[scenario]\ndefense = long_range\n", "long_range");
    expect_error("schema_version = 1\n[scenario]\nattack = poly_gic cic\n", "aic|bic");
    expect_error("schema_version = 1\n[scenario]\nn = twelve\n", "twelve");
  }

  TEST_CASE("comments and blank lines are ignored") {
    const std::string text =
        "# leading comment\n"
        "schema_version = 1\n"
        "\n"
        "[scenario]\n"
        "id = commented   # trailing comment\n"
        "target = poly 1 -4 4\n"
        "distribution = beta 1 3\n"
        "attack = none\n"
        "defense = no_defense\n"
        "n = 10\n"
        "u = 0.25\n";
    ScenarioConfig cfg = parse_scenario_config(text);
    CHECK(cfg.id == "commented");
    CHECK(cfg.n_values == std::vector<int>{10});
  }

  TEST_CASE("validate_config rejects structural mistakes") {
    ScenarioConfig cfg = tiny_config();
    CHECK_NOTHROW(validate_config(cfg));

    ScenarioConfig bad = cfg;
    bad.defenses.clear();
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.id = "has space";
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.id = "";
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.n_values.clear();
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.u_values.clear();
    CHECK_THROWS_AS(validate_config(bad), config_error);

    // Cell-level rules propagate: an order-selecting attack needs a
    // univariate design, and auto boundary calibration needs u in [0, 0.5).
    bad = cfg;
    bad.dist = UniformCube{2};
    CHECK_THROWS_AS(validate_config(bad), config_error);

    ScenarioConfig cls;
    cls.id = "cls";
    LinearClassifierModel m;
    m.beta = Vector(2);
    m.beta << 1.0, -1.0;
    cls.target = m;
    cls.dist = UniformCube{2};
    cls.attack = LinearErmAttack{};
    cls.defenses = {BoundaryShiftDefense{}};
    cls.n_values = {100};
    cls.u_values = {0.6};
    cls.seed = 1;
    CHECK_THROWS_AS(validate_config(cls), config_error);
    cls.u_values = {0.2};
    CHECK_NOTHROW(validate_config(cls));
  }

  TEST_CASE("every built-in scenario parses, validates, and keeps its id") {
    const auto& builtins = builtin_scenarios();
    REQUIRE(builtins.size() == 6);
    std::vector<std::string> expect = {"poly_defense_vs_n", "poly_defense_vs_u", "highdim_mvp",
                                       "knn_rates",         "class_rates",       "prob_shift"};
    for (size_t i = 0; i < builtins.size(); ++i) {
      CAPTURE(builtins[i].id);
      CHECK(builtins[i].id == expect[i]);
      CHECK(!builtins[i].description.empty());
      ScenarioConfig cfg = parse_scenario_config(builtins[i].text);
      CHECK(cfg.id == builtins[i].id);
      CHECK_NOTHROW(validate_config(cfg));
    }
  }

  TEST_CASE("load_scenario resolves built-in ids, files, and nothing else") {
    ScenarioConfig builtin = load_scenario("knn_rates");
    CHECK(builtin.id == "knn_rates");
    CHECK(builtin.n_values.size() == 5);

    fs::path dir = scratch_dir("load");
    fs::create_directories(dir);
    fs::path file = dir / "custom.cfg";
    {
      std::ofstream out(file);
      out << serialize_config(tiny_config());
    }
    ScenarioConfig from_file = load_scenario(file.string());
    CHECK(from_file.id == "tiny");

    CHECK_THROWS_AS(load_scenario((dir / "missing.cfg").string()), config_error);
    fs::remove_all(dir);
  }

  TEST_CASE("run_scenario produces the full factorial in deterministic order") {
    ScenarioConfig cfg = tiny_config();
    cfg.n_values = {20, 30};
    ScenarioResult res = run_scenario(cfg);
    // 2 defenses x 2 n x 1 u x 2 replicates.
    REQUIRE(res.raw.size() == 8);
    REQUIRE(res.summary.size() == 4);
    CHECK(res.raw[0].defense == defense_label(NoDefense{}));
    CHECK(res.raw[0].n == 20);
    CHECK(res.raw[0].replicate == 0);
    CHECK(res.raw[1].replicate == 1);
    CHECK(res.raw[2].n == 30);
    CHECK(res.raw[4].defense == defense_label(ConstantNoising{}));
    for (const auto& s : res.summary) {
      CHECK(s.scenario == "tiny");
      CHECK(s.replicates == 2);
      CHECK(s.failed == 0);
      CHECK(std::isfinite(s.privacy_mean));
      CHECK(std::isfinite(s.utility_mean));
    }
    // The undefended cells pay no utility cost; the constant defense pays
    // exactly its budget.
    CHECK(res.summary[0].utility_mean == 0.0);
    CHECK(res.summary[2].utility_mean == doctest::Approx(0.25).epsilon(1e-12));

    ScenarioResult again = run_scenario(cfg);
    CHECK(write_raw_csv(again.raw) == write_raw_csv(res.raw));
    CHECK(write_summary_csv(again.summary) == write_summary_csv(res.summary));
  }

  TEST_CASE("raw csv round-trips values, metadata, and sanitized errors") {
    std::vector<RawRow> rows(3);
    rows[0].scenario = "s";
    rows[0].defense = "constant";
    rows[0].n = 100;
    rows[0].u = 0.25;
    rows[0].replicate = 0;
    rows[0].outcome.privacy = 0.12345678901234567;
    rows[0].outcome.utility = 0.25;
    rows[0].outcome.sym_diff = 4;
    rows[0].outcome.meta.selected_order = 3;
    rows[0].outcome.meta.lambda1 = 0.015625;
    rows[0].outcome.meta.lambda2 = 0.5;

    rows[1].scenario = "s";
    rows[1].defense = "constant";
    rows[1].n = 100;
    rows[1].u = 0.25;
    rows[1].replicate = 1;
    rows[1].outcome.meta.knn_k = 7;
    rows[1].outcome.utility = 1.0 / 3.0;

    rows[2].scenario = "s";
    rows[2].defense = "constant";
    rows[2].n = 100;
    rows[2].u = 0.25;
    rows[2].replicate = 2;
    rows[2].outcome.error = "bad, worse\nworst";

    const std::string text = write_raw_csv(rows);
    CHECK(text.rfind("scenario,defense,n,u,replicate,privacy,utility,sym_diff,q_hat,k_sel,"
                     "lambda1,lambda2,error\n",
                     0) == 0);
    std::vector<RawRow> back = parse_raw_csv(text);
    REQUIRE(back.size() == 3);
    CHECK(back[0].outcome.privacy == rows[0].outcome.privacy);  // %.17g is lossless
    CHECK(back[0].outcome.sym_diff == rows[0].outcome.sym_diff);
    CHECK(back[0].outcome.meta.selected_order == rows[0].outcome.meta.selected_order);
    CHECK(back[0].outcome.meta.lambda1 == rows[0].outcome.meta.lambda1);
    CHECK(back[0].outcome.meta.lambda2 == rows[0].outcome.meta.lambda2);
    CHECK(back[1].outcome.meta.knn_k == rows[1].outcome.meta.knn_k);
    CHECK(back[1].outcome.utility == rows[1].outcome.utility);
    CHECK(std::isnan(back[1].outcome.privacy));
    CHECK(!back[1].outcome.sym_diff.has_value());
    // Separators inside error text are sanitized so the row still parses.
    CHECK(back[2].outcome.error == "bad; worse worst");
    CHECK(!back[2].outcome.ok());

    // A second write of the parsed rows is byte-identical.
    CHECK(write_raw_csv(back) == text);

    CHECK_THROWS_AS(parse_raw_csv("wrong,header\n"), config_error);
    CHECK_THROWS_AS(parse_raw_csv(text + "short,row\n"), config_error);
  }

  TEST_CASE("summary csv round-trips including absent aggregates") {
    std::vector<SummaryRow> rows(2);
    rows[0].scenario = "s";
    rows[0].defense = "shuffle(0.3)";
    rows[0].n = 500;
    rows[0].u = 0.0;
    rows[0].replicates = 20;
    rows[0].utility_mean = 0.11;
    rows[0].utility_se = 0.01;
    // privacy_* stay NaN: no attacker ran.
    rows[1].scenario = "s";
    rows[1].defense = "iid";
    rows[1].n = 500;
    rows[1].u = 0.25;
    rows[1].replicates = 20;
    rows[1].failed = 3;
    rows[1].privacy_mean = 0.5;
    rows[1].privacy_se = 0.05;
    rows[1].utility_mean = 0.24;
    rows[1].utility_se = 0.02;
    rows[1].symdiff_mean = 2.5;
    rows[1].symdiff_se = 0.5;

    const std::string text = write_summary_csv(rows);
    std::vector<SummaryRow> back = parse_summary_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(std::isnan(back[0].privacy_mean));
    CHECK(std::isnan(back[0].symdiff_mean));
    CHECK(back[0].utility_mean == 0.11);
    CHECK(back[1].failed == 3);
    CHECK(back[1].symdiff_mean == 2.5);
    CHECK(write_summary_csv(back) == text);
    CHECK_THROWS_AS(parse_summary_csv("nope\n"), config_error);
  }

  TEST_CASE("fnv1a64 matches the reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(fnv1a64("a") != fnv1a64("b"));
  }

  TEST_CASE("write_run_outputs writes raw, summary, and manifest; reruns are byte-identical") {
    ScenarioConfig cfg = tiny_config();
    ScenarioResult res = run_scenario(cfg);

    fs::path dir = scratch_dir("outputs");
    std::string used = write_run_outputs(res, dir.string());
    CHECK(used == dir.string());
    CHECK(fs::exists(dir / "raw.csv"));
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "manifest"));

    const std::string raw1 = read_file(dir / "raw.csv");
    CHECK(raw1 == write_raw_csv(res.raw));
    CHECK(parse_raw_csv(raw1).size() == res.raw.size());

    const std::string manifest = read_file(dir / "manifest");
    CHECK(manifest.find("scenario = tiny") != std::string::npos);
    CHECK(manifest.find("seed = 99") != std::string::npos);
    CHECK(manifest.find(std::string("toolkit_version = ") + kToolkitVersion) !=
          std::string::npos);
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize_config(cfg))));
    CHECK(manifest.find(std::string("config_hash = ") + hash) != std::string::npos);

    // A fresh run of the same config lands byte-for-byte on the same files.
    fs::path dir2 = scratch_dir("outputs2");
    write_run_outputs(run_scenario(cfg), dir2.string());
    CHECK(read_file(dir2 / "raw.csv") == raw1);
    CHECK(read_file(dir2 / "summary.csv") == read_file(dir / "summary.csv"));
    fs::remove_all(dir);
    fs::remove_all(dir2);
  }

  TEST_CASE("export_figure_data pivots the summary into plot series") {
    // Hand-built 2-defense x 3-n summary at one budget.
    std::vector<SummaryRow> summary;
    for (const std::string& d : {"alpha", "bravo"}) {
      for (int n : {100, 200, 400}) {
        SummaryRow r;
        r.scenario = "s";
        r.defense = d;
        r.n = n;
        r.u = 0.25;
        r.replicates = 10;
        r.privacy_mean = n * (d == "alpha" ? 1.0 : 2.0);
        r.privacy_se = 0.5;
        r.symdiff_mean = 1.0;
        r.symdiff_se = 0.1;
        r.utility_mean = 0.25;
        r.utility_se = 0.0;
        summary.push_back(r);
      }
    }
    const std::string csv = export_figure_data(summary, "privacy_vs_n");
    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "x,defense,mean,se");
    std::vector<std::string> data_lines;
    while (std::getline(in, line))
      if (!line.empty()) data_lines.push_back(line);
    REQUIRE(data_lines.size() == 6);
    CHECK(data_lines[0] == "100,alpha,100,0.5");
    CHECK(data_lines[3] == "100,bravo,200,0.5");

    // The u-axis views refuse this table: three n values make cells ambiguous.
    CHECK_THROWS_AS(export_figure_data(summary, "privacy_vs_u"), config_error);
    CHECK_THROWS_AS(export_figure_data(summary, "symdiff_vs_u"), config_error);

    // Drop one cell: the missing (defense, x) pair is named in the error.
    std::vector<SummaryRow> holey = summary;
    holey.erase(holey.begin() + 4);  // bravo, n=200
    try {
      export_figure_data(holey, "privacy_vs_n");
      FAIL_CHECK("expected config_error for missing cell");
    } catch (const config_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("bravo") != std::string::npos);
      CHECK(msg.find("200") != std::string::npos);
    }

    CHECK_THROWS_AS(export_figure_data(summary, "privacy_vs_time"), config_error);
    CHECK_THROWS_AS(export_figure_data({}, "privacy_vs_n"), config_error);

    // symdiff view over u on a single-n table.
    std::vector<SummaryRow> by_u;
    for (double u : {0.1, 0.2}) {
      SummaryRow r;
      r.scenario = "s";
      r.defense = "alpha";
      r.n = 100;
      r.u = u;
      r.replicates = 10;
      r.symdiff_mean = 10 * u;
      r.symdiff_se = u;
      by_u.push_back(r);
    }
    const std::string sd = export_figure_data(by_u, "symdiff_vs_u");
    auto g17 = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    CHECK(sd.find(g17(0.1) + ",alpha," + g17(10 * 0.1) + "," + g17(0.1)) != std::string::npos);
    CHECK(sd.find(g17(0.2) + ",alpha," + g17(10 * 0.2) + "," + g17(0.2)) != std::string::npos);
  }
}
