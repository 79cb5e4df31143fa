#pragma once

#include "bridgecat/bridge.hpp"
#include "bridgecat/denoiser.hpp"
#include "bridgecat/geometry.hpp"
#include "bridgecat/metrics.hpp"
#include "bridgecat/outlier.hpp"
#include "bridgecat/screening.hpp"
#include "bridgecat/trainer.hpp"

#include <map>
#include <string>
#include <vector>

namespace bridgecat {

/// Extended-XYZ dialect: N, then a key=value header carrying
/// Lattice="ax ay az bx by bz cx cy cz", pbc="T T F" and
/// Properties=species:S:1:pos:R:3:fixed:I:1:adsorbate:I:1, then per-atom
/// lines "Symbol x y z fixed adsorbate". Numbers carry 12 significant digits.
std::string structure_to_xyz(const Structure& structure);
Structure structure_from_xyz(const std::string& text, const std::string& origin = "<string>");

Structure read_structure(const std::string& path);
void write_structure(const Structure& structure, const std::string& path);

/// One JSON-lines record of a dataset manifest.
struct ManifestRecord {
  std::string id;
  std::string initial_path;
  std::string relaxed_path; // empty when only an initial structure exists
  std::string adsorbate;
  std::string facet;
  std::vector<std::string> tags;
};

std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path);

/// Loads records that carry both paths as training pairs; paths resolve
/// relative to the manifest location.
std::vector<StructurePair> load_pairs(const std::string& manifest_path);
/// Loads every record's initial structure.
std::vector<Structure> load_initial_structures(const std::string& manifest_path);

/// RFC-4180 CSV with a stable column order.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_eval_csv(const EvalReport& report, const std::string& path);
void write_eval_summary_json(const EvalReport& report, const std::string& path);
EvalReport read_eval_summary_json(const std::string& path);

void write_candidates_csv(const std::vector<Candidate>& candidates, const std::string& path);

void write_labels_jsonl(const std::vector<OutlierLabel>& labels, const std::string& path);
std::vector<OutlierLabel> read_labels_jsonl(const std::string& path);

/// key = value configuration lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_value_file(const std::string& path);

/// Resolved run configuration mirroring the training-config key set.
struct RunConfig {
  DenoiserConfig model;
  TrainConfig train;
  int num_timesteps = 100;
  ScheduleMode mt_mode = ScheduleMode::kLinear;
  double max_var = 0.05;
  SamplerConfig sampler;

  BridgeSchedule schedule() const {
    return make_schedule_max_var(num_timesteps, mt_mode, max_var);
  }
};

RunConfig run_config_from_map(const std::map<std::string, std::string>& kv);
RunConfig read_run_config(const std::string& path);

std::string format_g12(double value);

} // namespace bridgecat
