#include "lodlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lodlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const std::string& item : split_list(s)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad integer '" + item + "' for " + key);
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s,
                                      const std::string& key) {
  std::vector<double> out;
  for (const std::string& item : split_list(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad number '" + item + "' for " + key);
    }
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sanitize_reason(std::string reason) {
  for (char& c : reason)
    if (c == ',' || c == '\n') c = ';';
  return reason;
}

}  // namespace

void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value) {
  if (key == "experiment") {
    config.experiment = value;
  } else if (key == "raster") {
    config.raster_path = value;
  } else if (key == "operator" || key == "operators") {
    config.operators = split_list(value);
  } else if (key == "beta") {
    config.betas = parse_double_list(value, key);
  } else if (key == "nH" || key == "n_H") {
    config.n_H_list = parse_int_list(value, key);
  } else if (key == "nh" || key == "n_h") {
    config.n_h = std::stoi(value);
  } else if (key == "k") {
    if (value == "tied" || value == "theory") {
      config.k_policy = value;
      config.k_list.clear();
    } else {
      config.k_policy = "fixed";
      config.k_list = parse_int_list(value, key);
    }
  } else if (key == "source") {
    config.source = value;
  } else if (key == "out") {
    config.out = value;
  } else if (key == "workers") {
    config.workers = std::max(1, std::stoi(value));
  } else if (key == "diag-nodes" || key == "diag_nodes") {
    config.diag_nodes = parse_int_list(value, key);
  } else {
    throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  ExperimentConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (config.betas.empty())
    throw std::runtime_error("config: beta list must not be empty");
  return config;
}

int k_tied(int n_H) {
  return int(std::lround(std::log2(double(n_H)))) + 1;
}

int k_theory(int n_H, double contrast) {
  const double H = std::sqrt(2.0) / n_H;
  const double k =
      2.0 * std::log(1.0 / H) + 0.5 * std::log(std::max(contrast, 1.0));
  return std::max(1, int(std::ceil(k)));
}

RasterCoefficient experiment_coefficient(const ExperimentConfig& config,
                                         double beta) {
  if (config.experiment == "blocks") return make_blocks(beta);
  if (config.experiment == "channels") return make_channels(beta);
  if (config.experiment == "raster") {
    if (config.raster_path.empty())
      throw std::runtime_error("raster experiment requires a raster path");
    return load_raster(config.raster_path);
  }
  throw std::runtime_error("unknown experiment '" + config.experiment +
                           "' (expected blocks | channels | raster)");
}

RasterGrid experiment_source(const ExperimentConfig& config) {
  if (config.source == "half-step" || config.source == "spe-corners")
    return builtin_source(config.source);
  return load_raster_grid(config.source);
}

namespace {

struct ReferenceEntry {
  SpMat stiffness;
  Vector load;
  Vector u_h;
  DofMap dofs;
};

std::vector<int> k_values_for(const ExperimentConfig& config, int n_H,
                              double contrast) {
  if (config.k_policy == "tied") return {k_tied(n_H)};
  if (config.k_policy == "theory") return {k_theory(n_H, contrast)};
  if (config.k_list.empty())
    throw std::runtime_error("config: fixed k policy requires a k list");
  return config.k_list;
}

int eps_resolution(const ExperimentConfig& config,
                   const RasterCoefficient& coeff) {
  if (config.experiment == "raster") {
    if (coeff.grid.nx != coeff.grid.ny)
      throw std::runtime_error(
          "raster experiment requires a square grid, got " +
          std::to_string(coeff.grid.nx) + "x" + std::to_string(coeff.grid.ny));
    return coeff.grid.nx;
  }
  return 32;  // generated benchmark coefficients live on a 1/32 grid
}

}  // namespace

bool ExperimentReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const ExperimentRow& r) { return r.reason.empty(); });
}

bool DiagnosticsReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const DiagnosticsRow& r) { return r.reason.empty(); });
}

ExperimentReport run(const ExperimentConfig& config) {
  ExperimentReport report;
  std::map<std::string, ReferenceEntry> references;

  for (const std::string& op_name : config.operators) {
    for (double beta : config.betas) {
      for (int n_H : config.n_H_list) {
        std::vector<int> ks;
        double contrast = beta;
        std::string setup_error;
        RasterCoefficient coeff;
        try {
          coeff = experiment_coefficient(config, beta);
          contrast = coeff.contrast();
          ks = k_values_for(config, n_H, contrast);
        } catch (const std::exception& e) {
          setup_error = e.what();
          ks = {0};
        }
        for (int k : ks) {
          ExperimentRow row;
          row.experiment = config.experiment;
          row.op = op_name;
          row.beta = config.experiment == "raster" ? contrast : beta;
          row.n_H = n_H;
          row.H = std::sqrt(2.0) / n_H;
          row.k = k;
          row.rel_energy_error = std::numeric_limits<double>::quiet_NaN();
          const auto start = std::chrono::steady_clock::now();
          try {
            if (!setup_error.empty()) throw std::runtime_error(setup_error);
            const int n_eps = eps_resolution(config, coeff);
            const MeshHierarchy hier = build_hierarchy(n_H, n_eps, config.n_h);

            const std::string ref_key = config.experiment + "|" +
                                        format_double(beta) + "|" +
                                        config.raster_path + "|" +
                                        config.source + "|" +
                                        std::to_string(config.n_h);
            auto ref_it = references.find(ref_key);
            if (ref_it == references.end()) {
              ReferenceEntry entry;
              entry.dofs = make_dof_map(hier.fine);
              const Vector a = sample_on_mesh(coeff.grid, hier.fine);
              entry.stiffness = assemble_stiffness(hier.fine, a, entry.dofs);
              entry.load = assemble_load(hier.fine, experiment_source(config),
                                         entry.dofs);
              entry.u_h = solve_spd(entry.stiffness, entry.load);
              ref_it = references.emplace(ref_key, std::move(entry)).first;
            }
            const ReferenceEntry& ref = ref_it->second;

            LodProblem prob;
            prob.hier = &hier;
            prob.a_fine = sample_on_mesh(coeff.grid, hier.fine);
            prob.stiffness = ref.stiffness;
            prob.prolongation = interior_prolongation(hier);
            prob.fine_dofs = ref.dofs;
            for (int v = 0; v < hier.coarse.num_vertices(); ++v)
              if (!hier.coarse.boundary_vertex[v])
                prob.coarse_interior.push_back(v);

            const InterpolationOperator op = build_operator(
                operator_kind_from_string(op_name), hier, coeff);
            const CorrectorSet set = compute_correctors(
                prob, op, k, Localization::Nodal, config.workers);
            const CoarseSolution sol = solve_coarse(prob, set, ref.load);

            row.rel_energy_error =
                relative_energy_error(ref.u_h, sol.lifted, prob.stiffness);
            row.coarse_dofs = prob.coarse_size();
            row.fine_dofs = prob.fine_size();
            row.corrector_solves = set.solves;
          } catch (const std::exception& e) {
            row.reason = sanitize_reason(e.what());
          }
          row.wall_time_s = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start)
                                .count();
          report.rows.push_back(std::move(row));
        }
      }
    }
  }

  std::sort(report.rows.begin(), report.rows.end(),
            [](const ExperimentRow& a, const ExperimentRow& b) {
              return std::tie(a.op, a.beta, a.n_H, a.k) <
                     std::tie(b.op, b.beta, b.n_H, b.k);
            });
  return report;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "experiment,operator,beta,n_H,H,k,rel_energy_error,coarse_dofs,"
         "fine_dofs,corrector_solves,wall_time_s,reason\n";
  for (const ExperimentRow& r : report.rows) {
    out << r.experiment << ',' << r.op << ',' << format_double(r.beta) << ','
        << r.n_H << ',' << format_double(r.H) << ',' << r.k << ','
        << format_double(r.rel_energy_error) << ',' << r.coarse_dofs << ','
        << r.fine_dofs << ',' << r.corrector_solves << ','
        << format_double(r.wall_time_s) << ',' << r.reason << '\n';
  }
  return out.str();
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  out << report_to_csv(report);
}

DiagnosticsReport diagnose(const ExperimentConfig& config) {
  DiagnosticsReport report;
  if (config.n_H_list.empty())
    throw std::runtime_error("config: nH list must not be empty");
  const int n_H = config.n_H_list.front();

  for (const std::string& op_name : config.operators) {
    for (double beta : config.betas) {
      try {
        const RasterCoefficient coeff = experiment_coefficient(config, beta);
        const int n_eps = eps_resolution(config, coeff);
        const MeshHierarchy hier = build_hierarchy(n_H, n_eps, config.n_h);
        const InterpolationOperator op =
            build_operator(operator_kind_from_string(op_name), hier, coeff);
        const QIConstants qi = estimate_qi3(op, coeff);

        for (int T = 0; T < hier.coarse.num_triangles(); ++T) {
          DiagnosticsRow row;
          row.record = "patch";
          row.experiment = config.experiment;
          row.op = op_name;
          row.beta = beta;
          row.n_H = n_H;
          row.id = T;
          try {
            const QuasiMonoReport qm = classify_quasi_monotone(coeff, hier, T);
            row.qm_type = qm.type == QuasiMonoType::Type1   ? "type1"
                          : qm.type == QuasiMonoType::Type0 ? "type0"
                                                            : "none";
            row.c_p =
                estimate_poincare(coeff, hier, element_neighborhood(hier, T))
                    .c_p;
            row.qi3 = qi.per_triangle(T);
          } catch (const std::exception& e) {
            row.reason = sanitize_reason(e.what());
          }
          report.rows.push_back(std::move(row));
        }

        // decay profiles for the selected nodes (default: vertex nearest the
        // domain center)
        const LodProblem prob = make_lod_problem(hier, coeff);
        std::vector<int> nodes = config.diag_nodes;
        if (nodes.empty())
          nodes = {hier.coarse.vertex_id(hier.coarse.n / 2, hier.coarse.n / 2)};
        std::vector<int> ks;
        for (int k = 1; k <= 2 * n_H; ++k) ks.push_back(k);
        for (int z : nodes) {
          try {
            const Corrector cor = corrector_global(prob, op, z);
            for (const auto& [k, tail] : decay_profile(prob, cor, ks)) {
              DiagnosticsRow row;
              row.record = "decay";
              row.experiment = config.experiment;
              row.op = op_name;
              row.beta = beta;
              row.n_H = n_H;
              row.id = z;
              row.k = k;
              row.tail_energy = tail;
              report.rows.push_back(std::move(row));
            }
          } catch (const std::exception& e) {
            DiagnosticsRow row;
            row.record = "decay";
            row.experiment = config.experiment;
            row.op = op_name;
            row.beta = beta;
            row.n_H = n_H;
            row.id = z;
            row.reason = sanitize_reason(e.what());
            report.rows.push_back(std::move(row));
          }
        }
      } catch (const std::exception& e) {
        DiagnosticsRow row;
        row.record = "patch";
        row.experiment = config.experiment;
        row.op = op_name;
        row.beta = beta;
        row.n_H = n_H;
        row.reason = sanitize_reason(e.what());
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

std::string diagnostics_to_csv(const DiagnosticsReport& report) {
  std::ostringstream out;
  out << "record,experiment,operator,beta,n_H,id,k,qm_type,c_p,qi3,"
         "tail_energy,reason\n";
  for (const DiagnosticsRow& r : report.rows) {
    out << r.record << ',' << r.experiment << ',' << r.op << ','
        << format_double(r.beta) << ',' << r.n_H << ',' << r.id << ',' << r.k
        << ',' << r.qm_type << ',' << format_double(r.c_p) << ','
        << format_double(r.qi3) << ',' << format_double(r.tail_energy) << ','
        << r.reason << '\n';
  }
  return out.str();
}

void write_diagnostics_csv(const DiagnosticsReport& report,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write diagnostics to '" + path + "'");
  out << diagnostics_to_csv(report);
}

}  // namespace lodlab
