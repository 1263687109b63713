#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gnls/blowup.hpp"

namespace gnls {

// Shortest round-tripping decimal form of x. All numeric output goes through
// this, which is what makes reruns byte-identical.
std::string format_double(double x);

// Graph description file: sections [vertices] (one id per line) and [edges]
// (lines "id v_a v_b length"), comments from '#' to end of line.
GraphSpec parse_graph_spec(const std::string& text, const std::string& origin);
MetricGraph read_graph_file(const std::string& path);
void write_graph_file(const MetricGraph& g, const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Nodal values as CSV rows (edge, s, value), edge by edge; endpoint rows
// repeat the shared vertex value once per incident edge end.
void write_function_csv(const GraphFunction& u, const std::string& path);
GraphFunction read_function_csv(const MeshPtr& mesh, const std::string& path);

// (index, eigenvalue, residual) rows.
void write_eig_csv(const SpectralResult& r, const std::string& path);

// One line per check: "name value tolerance PASS|FAIL".
std::string format_verify_report(const VerifyReport& rep);

// graph.g plus per-edge element counts (mesh.json); with these a state or
// trace directory reconstructs its own discretization.
void write_mesh_info(const Mesh& mesh, const std::string& dir);
Discretization load_mesh_info(const std::string& dir);

// State directory: u.csv with the nodal values, state.json with the scalars
// (multiplier, parameters, energy, mass, residuals, Morse data, tags), and
// the mesh info files.
void save_state(const BoundState& s, const std::string& dir);
// Rebuilds the state from u.csv + state.json on an equivalent discretization;
// derived fields are recomputed, cached Morse indices are restored.
BoundState load_state(const Discretization& d, const std::string& dir);

// Trace directory: trace.csv (one summary row per entry) plus step_NNNN/
// state directories, each with its verify report.
void save_trace(const ContinuationTrace& t, const std::string& dir);
ContinuationTrace load_trace(const Discretization& d, const std::string& dir);

// One row per report: concentration scales, top-peak record, separation and
// envelope summaries.
void write_blowup_csv(const std::vector<BlowupReport>& reps, const std::string& path);

// Window samples (y, v, limit profile) sorted by y.
void write_profile_csv(const RescaledProfile& rp, double p, double rho, const std::string& path);

// Per-node (edge, s, concatenated arclength, |u|, envelope) for
// envelope-vs-u plots.
void write_envelope_csv(const BoundState& s, const std::vector<Peak>& peaks, double C1, double C2,
                        const std::string& path);

// Run manifest: the command, every input echoed, library/compiler versions,
// wall time. Everything a rerun needs.
void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    double wall_seconds);

}  // namespace gnls
