#include "matchfn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"

namespace matchfn {

namespace {

namespace pt = boost::property_tree;

template <class Int>
Int parse_integer(const std::string& text, const std::string& what) {
  Int value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw InputError(what + ": expected a nonnegative integer, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw InputError(what + ": expected true or false, got '" + text + "'");
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw InputError(what + ": empty list element");
    out.push_back(io::parse_number(item.substr(first, last - first + 1), what));
  }
  if (out.empty()) throw InputError(what + ": empty list");
  return out;
}

// Technology and efficiency parameters are collected first and assembled after
// all keys are read, so key order within [dgp] does not matter.
struct DgpDraft {
  std::string technology = "cobb_douglas";
  double alpha = 0.5;
  double share = 0.5;
  double substitution = 0.5;
  std::string efficiency = "log_ar1";
  dgp::LogAr1Efficiency ar1;
  double level = 1.0;
  double trend_start = 1.0;
  double trend_growth = 0.0;
};

using Setter = void (*)(RunConfig&, DgpDraft&, const std::string& value, const std::string& key);

double num(const std::string& v, const std::string& w) { return io::parse_number(v, w); }
std::size_t size(const std::string& v, const std::string& w) { return parse_integer<std::size_t>(v, w); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"input.path", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.input = v; }},
      {"input.period_column", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.schema.period = v; }},
      {"input.hires_column", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.schema.hires = v; }},
      {"input.seekers_column", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.schema.seekers = v; }},
      {"input.vacancies_column",
       [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.schema.vacancies = v; }},
      {"input.market_column", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.schema.market = v; }},
      {"output.dir", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.output = v; }},

      {"kernel.bandwidth", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.kernel.bandwidth = num(v, w);
       }},
      {"kernel.vacancy_bandwidth", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.kernel.vacancy_bandwidth = num(v, w);
       }},
      {"kernel.tie_rule", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) {
         c.estimation.kernel.tie_rule = kernel::parse_tie_rule(v);
       }},
      {"kernel.min_effective_weight", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.kernel.min_effective_weight = num(v, w);
       }},
      {"panel.scaling", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) {
         c.estimation.scaling = parse_scaling_mode(v);
       }},

      {"identify.base_index", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) { c.base_index = size(v, w); }},
      {"identify.normalization", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.normalization = num(v, w);
       }},
      {"identify.tolerance", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.solve.tolerance = num(v, w);
       }},
      {"identify.grid_points", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.solve.grid_points = size(v, w);
       }},
      {"identify.bracket_expansion", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.solve.bracket_expansion = num(v, w);
       }},
      {"identify.max_flagged_share", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.estimation.max_flagged_share = num(v, w);
       }},
      {"identify.surface_psi_points", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.surface_psi_points = size(v, w);
       }},
      {"identify.surface_lambda_points", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.surface_lambda_points = size(v, w);
       }},

      {"elasticity.penalty", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         if (v == "cv") {
           c.penalty.mode = elasticity::PenaltyConfig::Mode::cross_validated;
         } else {
           c.penalty.mode = elasticity::PenaltyConfig::Mode::fixed;
           c.penalty.penalty = num(v, w);
         }
       }},
      {"elasticity.folds", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) { c.penalty.folds = size(v, w); }},
      {"elasticity.grid_size", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.penalty.grid_size = size(v, w);
       }},
      {"elasticity.grid_ratio", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.penalty.grid_ratio = num(v, w);
       }},
      {"elasticity.tolerance", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.penalty.tolerance = num(v, w);
       }},
      {"elasticity.max_iterations", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.penalty.max_iterations = size(v, w);
       }},
      {"elasticity.rolling_window", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.rolling_window = size(v, w);
       }},
      {"elasticity.denominator", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         if (v == "fitted") {
           c.denominator = elasticity::Denominator::fitted;
         } else if (v == "observed") {
           c.denominator = elasticity::Denominator::observed;
         } else {
           throw InputError(w + ": expected fitted or observed, got '" + v + "'");
         }
       }},

      {"dgp.technology", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string&) { draft.technology = v; }},
      {"dgp.alpha", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) { draft.alpha = num(v, w); }},
      {"dgp.share", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) { draft.share = num(v, w); }},
      {"dgp.substitution", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.substitution = num(v, w);
       }},
      {"dgp.efficiency", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string&) { draft.efficiency = v; }},
      {"dgp.efficiency_mean", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.ar1.mean = num(v, w);
       }},
      {"dgp.efficiency_persistence", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.ar1.persistence = num(v, w);
       }},
      {"dgp.efficiency_sd", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.ar1.innovation_sd = num(v, w);
       }},
      {"dgp.efficiency_level", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.level = num(v, w);
       }},
      {"dgp.efficiency_start", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.trend_start = num(v, w);
       }},
      {"dgp.efficiency_growth", [](RunConfig&, DgpDraft& draft, const std::string& v, const std::string& w) {
         draft.trend_growth = num(v, w);
       }},
      {"dgp.seekers_initial", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.dgp.seekers.initial = num(v, w);
       }},
      {"dgp.seekers_drift", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.dgp.seekers.drift = num(v, w);
       }},
      {"dgp.seekers_sd", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) { c.dgp.seekers.sd = num(v, w); }},
      {"dgp.vacancy_ratio", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.dgp.vacancies.ratio = num(v, w);
       }},
      {"dgp.vacancy_loading", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.dgp.vacancies.seeker_loading = num(v, w);
       }},
      {"dgp.vacancy_persistence", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.dgp.vacancies.persistence = num(v, w);
       }},
      {"dgp.vacancy_sd", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.dgp.vacancies.sd = num(v, w);
       }},
      {"dgp.periods", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) { c.dgp.periods = size(v, w); }},
      {"dgp.noise_sd", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) { c.dgp.noise_sd = num(v, w); }},
      {"dgp.start_period", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) {
         c.dgp.start_period = parse_period(v);
       }},
      {"dgp.market_id", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string&) { c.dgp.market_id = v; }},

      {"validate.alphas", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.validation.alphas = parse_number_list(v, w);
       }},
      {"validate.replications", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.validation.replications = size(v, w);
       }},
      {"validate.noise_sd", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.validation.noise_sd = num(v, w);
       }},
      {"validate.noise_free_checks", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.validation.noise_free_checks = parse_bool(v, w);
       }},
      {"validate.ray_points", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.validation.ray_points = size(v, w);
       }},

      {"run.threads", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.threads = parse_integer<int>(v, w);
       }},
      {"run.seed", [](RunConfig& c, DgpDraft&, const std::string& v, const std::string& w) {
         c.seed = parse_integer<std::uint64_t>(v, w);
       }},
  };
  return table;
}

void assemble(const DgpDraft& d, RunConfig& c) {
  if (d.technology == "cobb_douglas") {
    c.dgp.technology = dgp::CobbDouglas{d.alpha};
  } else if (d.technology == "ces") {
    c.dgp.technology = dgp::Ces{d.share, d.substitution};
  } else {
    throw InputError("dgp.technology: expected cobb_douglas or ces, got '" + d.technology + "'");
  }
  if (d.efficiency == "log_ar1") {
    c.dgp.efficiency = d.ar1;
  } else if (d.efficiency == "constant") {
    c.dgp.efficiency = dgp::ConstantEfficiency{d.level};
  } else if (d.efficiency == "trend") {
    c.dgp.efficiency = dgp::TrendEfficiency{d.trend_start, d.trend_growth};
  } else {
    throw InputError("dgp.efficiency: expected log_ar1, constant or trend, got '" + d.efficiency + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  estimation.kernel.validate();
  if (!(normalization > 0.0)) throw InputError("identify.normalization must be positive");
  if (!(estimation.solve.tolerance > 0.0)) throw InputError("identify.tolerance must be positive");
  if (estimation.solve.grid_points < 3) throw InputError("identify.grid_points must be at least 3");
  if (!(estimation.solve.bracket_expansion >= 0.0)) throw InputError("identify.bracket_expansion must be nonnegative");
  if (!(estimation.max_flagged_share >= 0.0 && estimation.max_flagged_share <= 1.0)) {
    throw InputError("identify.max_flagged_share must lie in [0, 1]");
  }
  if (surface_psi_points < 2 || surface_lambda_points < 2) {
    throw InputError("identify.surface_*_points must be at least 2");
  }
  if (penalty.mode == elasticity::PenaltyConfig::Mode::fixed && !(penalty.penalty >= 0.0)) {
    throw InputError("elasticity.penalty must be 'cv' or a nonnegative number");
  }
  if (penalty.folds < 2) throw InputError("elasticity.folds must be at least 2");
  if (penalty.grid_size < 1) throw InputError("elasticity.grid_size must be at least 1");
  if (!(penalty.grid_ratio > 0.0 && penalty.grid_ratio < 1.0)) {
    throw InputError("elasticity.grid_ratio must lie in (0, 1)");
  }
  if (!(penalty.tolerance > 0.0)) throw InputError("elasticity.tolerance must be positive");
  if (rolling_window < kMinEstimationLength) {
    throw InputError("elasticity.rolling_window must be at least " + std::to_string(kMinEstimationLength));
  }
  dgp::validate(dgp);
  if (validation.alphas.empty()) throw InputError("validate.alphas must not be empty");
  for (double a : validation.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("validate.alphas must lie in (0, 1)");
  }
  if (validation.replications < 1) throw InputError("validate.replications must be at least 1");
  if (!(validation.noise_sd >= 0.0)) throw InputError("validate.noise_sd must be nonnegative");
  if (validation.ray_points < 2) throw InputError("validate.ray_points must be at least 2");
  if (threads < 0) throw InputError("run.threads must be nonnegative");
}

namespace {

// ini_parser only knows whole-line ';' comments. Drop trailing "; ..." and
// "# ..." comments (marker preceded by whitespace) and '#' comment lines,
// keeping line numbers intact.
std::string strip_comments(std::istream& in) {
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') line.clear();
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.erase(i);
        break;
      }
    }
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source) {
  pt::ptree tree;
  try {
    std::istringstream text(strip_comments(in));
    pt::ini_parser::read_ini(text, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  DgpDraft draft;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw InputError(source + ": key '" + section + "' is outside any [section]");
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      auto it = table.find(name);
      if (it == table.end()) throw InputError(source + ": unknown key '" + name + "'");
      it->second(config, draft, node.data(), name);
    }
  }
  assemble(draft, config);
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

std::optional<int> threads_from_environment() {
  const char* raw = std::getenv("MATCHFN_THREADS");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  return parse_integer<int>(raw, "MATCHFN_THREADS");
}

std::string default_config_text() {
  const RunConfig c;
  const auto n = [](double v) { return io::format_number(v); };
  std::ostringstream out;
  out << "[input]\npath =\nperiod_column = " << c.schema.period << "\nhires_column = " << c.schema.hires
      << "\nseekers_column = " << c.schema.seekers << "\nvacancies_column = " << c.schema.vacancies
      << "\nmarket_column = " << c.schema.market << "\n\n"
      << "[output]\ndir = " << c.output.string() << "\n\n"
      << "[kernel]\nbandwidth = " << n(c.estimation.kernel.bandwidth)
      << "\ntie_rule = " << kernel::to_string(c.estimation.kernel.tie_rule)
      << "\nmin_effective_weight = " << n(c.estimation.kernel.min_effective_weight) << "\n\n"
      << "[panel]\nscaling = " << to_string(c.estimation.scaling) << "\n\n"
      << "[identify]\nbase_index = " << c.base_index << "\nnormalization = " << n(c.normalization)
      << "\ntolerance = " << n(c.estimation.solve.tolerance) << "\ngrid_points = " << c.estimation.solve.grid_points
      << "\nbracket_expansion = " << n(c.estimation.solve.bracket_expansion)
      << "\nmax_flagged_share = " << n(c.estimation.max_flagged_share) << "\n\n"
      << "[elasticity]\npenalty = cv\nfolds = " << c.penalty.folds << "\ngrid_size = " << c.penalty.grid_size
      << "\ngrid_ratio = " << n(c.penalty.grid_ratio) << "\ntolerance = " << n(c.penalty.tolerance)
      << "\nrolling_window = " << c.rolling_window << "\ndenominator = fitted\n\n"
      << "[dgp]\ntechnology = cobb_douglas\nalpha = 0.5\nefficiency = log_ar1\nefficiency_mean = 0"
      << "\nefficiency_persistence = 0.8\nefficiency_sd = 0.1\nperiods = " << c.dgp.periods
      << "\nnoise_sd = " << n(c.dgp.noise_sd) << "\n\n"
      << "[validate]\nalphas = 0.5, 0.3\nreplications = " << c.validation.replications
      << "\nnoise_sd = " << n(c.validation.noise_sd) << "\n\n"
      << "[run]\nthreads = 0\nseed = 0\n";
  return out.str();
}

}  // namespace matchfn
