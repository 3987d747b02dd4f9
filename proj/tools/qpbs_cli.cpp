// qpbs: parameter sweeps, band exports and oracle checks.
//
//   qpbs --task teff-2qe --dmin -4 --dmax 4 --dsteps 81 --omin 0.05 --omax 4 --osteps 80 --d 1 --out teff
//
// Writes <out>.csv and <out>.json (run manifest).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "qpbs/sweep.hpp"

namespace {

unsigned default_jobs() {
  if (const char* e = std::getenv("QPBS_JOBS")) {
    try {
      const int v = std::stoi(e);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
    std::cerr << "qpbs: ignoring QPBS_JOBS='" << e << "'\n";
  }
  return 1;
}

std::string stem_of(std::string out) {
  if (out.size() > 4 && out.compare(out.size() - 4, 4, ".csv") == 0) out.resize(out.size() - 4);
  return out;
}

nlohmann::json tolerances(const std::string& task) {
  using nlohmann::json;
  if (task == "dmrg-point") {
    const qpbs::DmrgOptions o;
    return json{{"energy_tol", o.energy_tol},
                {"truncation_tol", o.truncation_tol},
                {"svd_cutoff", o.svd_cutoff},
                {"min_sweeps", o.min_sweeps},
                {"max_sweeps", o.max_sweeps},
                {"sector_drift", qpbs::kSectorDriftTol}};
  }
  if (task == "check-suite") return json{{"level_match", 1e-8}, {"band_match", 1e-6}, {"triplon_match", 1e-5}, {"dmrg_vs_ed", 1e-7}};
  return json{{"root_tol", 1e-12}, {"absent", qpbs::sweep::kAbsent}};
}

}  // namespace

int main(int argc, char** argv) {
  qpbs::sweep::SweepConfig c;
  c.jobs = default_jobs();

  CLI::App app{"qubit-photon bound-state sweeps"};
  app.allow_extras(false);
  app.add_option("--task", c.task, "task")->required()->check(CLI::IsMember(qpbs::sweep::task_names()));
  app.add_option("--dmin", c.dmin, "Delta range start (units of J)");
  auto* dmax = app.add_option("--dmax", c.dmax, "Delta range end (default: --dmin)");
  app.add_option("--dsteps", c.dsteps, "Delta grid points");
  app.add_option("--omin", c.omin, "Omega range start");
  auto* omax = app.add_option("--omax", c.omax, "Omega range end (default: --omin)");
  app.add_option("--osteps", c.osteps, "Omega grid points");
  app.add_option("--d", c.d, "emitter separation (two-emitter tasks)");
  app.add_option("--z", c.z, "array spacing; 0 takes --d");
  app.add_option("--nb", c.nb, "bath cells or ring size; 0 for the task default");
  app.add_option("--n", c.n, "DMRG unit cells; 0 for 32");
  app.add_option("--cap", c.cap, "DMRG photon cap per bath site");
  app.add_option("--bond", c.bond, "DMRG bond dimension");
  app.add_option("--out", c.out, "output stem: <out>.csv and <out>.json");
  app.add_option("--jobs", c.jobs, "worker threads (default from QPBS_JOBS, else 1)");
  app.add_option("--seed", c.seed, "random seed");
  CLI11_PARSE(app, argc, argv);
  if (dmax->count() == 0) c.dmax = c.dmin;
  if (omax->count() == 0) c.omax = c.omin;

  const auto t0 = std::chrono::steady_clock::now();
  qpbs::sweep::Table table;
  try {
    table = qpbs::sweep::run(c);
  } catch (const std::exception& e) {
    std::cerr << "qpbs: " << e.what() << "\n";
    return 2;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string stem = stem_of(c.out);
  {
    std::ofstream f(stem + ".csv", std::ios::binary);
    f << qpbs::sweep::to_csv(table);
    if (!f) {
      std::cerr << "qpbs: cannot write " << stem << ".csv\n";
      return 2;
    }
  }
  nlohmann::json m{{"schema", qpbs::sweep::kSchema},
                   {"version", qpbs::sweep::kVersion},
                   {"config",
                    {{"task", c.task},
                     {"dmin", c.dmin},
                     {"dmax", c.dmax},
                     {"dsteps", c.dsteps},
                     {"omin", c.omin},
                     {"omax", c.omax},
                     {"osteps", c.osteps},
                     {"d", c.d},
                     {"z", c.spacing()},
                     {"nb", c.nb},
                     {"n", c.n},
                     {"cap", c.cap},
                     {"bond", c.bond},
                     {"jobs", c.jobs},
                     {"seed", c.seed}}},
                   {"tolerances", tolerances(c.task)},
                   {"rows", table.rows.size()},
                   {"errors", table.errors},
                   {"wall_seconds", wall},
                   {"csv", stem + ".csv"}};
  std::ofstream(stem + ".json") << m.dump(2) << "\n";

  if (c.task == "check-suite") {
    for (const auto& r : table.rows)
      std::cout << (r.cells[2] == "1" ? "PASS " : "FAIL ") << r.cells[0] << " " << r.cells[1] << ": " << r.cells[3] << "\n";
  }
  std::cerr << "qpbs: " << table.rows.size() << " rows, " << table.errors << " errors, " << wall << " s\n";
  return table.errors ? 1 : 0;
}
