#pragma once

// File formats.
//
// .rvol (native, little-endian):
//   offset  size  field
//        0     8  magic "TSRVOL\0\0"
//        8     4  uint32 version (= 1)
//       12     4  uint32 reserved (= 0)
//       16    24  int64 nx, ny, nz
//       40    24  float64 sx, sy, sz (mm)
//       64     4  uint32 dtype (1 uint8, 2 int16, 3 float32, 4 float64)
//       68     4  uint32 role  (0 probability, 1 logit, 2 binary)
//       72     -  payload, x-fastest
//
// .nii: single-file uncompressed NIfTI-1, datatypes uint8/int16/float32,
// at most 4 dims with a trailing singleton, spacing from pixdim[1..3].
//
// Barcode JSON, trajectory CSV and metrics CSV use fixed column orders;
// floats are printed with 9 significant digits.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "toposculpt/cubical_ph.hpp"
#include "toposculpt/error.hpp"
#include "toposculpt/metrics.hpp"
#include "toposculpt/phantom.hpp"
#include "toposculpt/refine.hpp"
#include "toposculpt/volume.hpp"

namespace toposculpt::io {

enum class FormatErrorCode {
    unknown_extension,
    malformed_header,
    truncated_payload,
    unsupported_dtype,
    unsupported_compression,
    unsupported_dimensionality,
    unwritable_path,
};

std::string to_string(FormatErrorCode code);

class FormatError : public InputError {
public:
    FormatError(FormatErrorCode code, const std::string& what)
        : InputError(to_string(code) + ": " + what), code_(code) {}
    FormatErrorCode code() const noexcept { return code_; }

private:
    FormatErrorCode code_;
};

enum class DType : std::uint32_t { uint8 = 1, int16 = 2, float32 = 3, float64 = 4 };

// Role: stored in .rvol; inferred for .nii (uint8 holding only 0/1 -> binary,
// values inside [0,1] -> probability, otherwise logit).
Volume read_volume(const std::filesystem::path& path);
// Reads and retags to `role` (validated).
Volume read_volume(const std::filesystem::path& path, Role role);

// Default dtype: uint8 for binary, float64 (.rvol) / float32 (.nii) otherwise.
void write_volume(const Volume& v, const std::filesystem::path& path, std::optional<DType> dtype = std::nullopt);

// Centerlines are stored as volumes holding branch id + 1 (0 = not centerline).
Volume centerline_volume(const CenterlineTruth& cl, const Volume& like);
CenterlineTruth centerline_from_volume(const Volume& labels);

std::string format_float(double v);  // 9 significant digits

nlohmann::json barcode_to_json(const Barcode& b);
Barcode barcode_from_json(const nlohmann::json& j);
void export_barcode(const Barcode& b, const std::filesystem::path& path);

inline constexpr const char* kTrajectoryHeader = "i,beta0,l_cor,l_com_voxel,l_com_struct,l_total,ph_recomputed";
inline constexpr const char* kMetricsHeader = "case,cldice,nsdice,hd95,bd,td,betti0_err,flags";

std::string trajectory_csv(const std::vector<TrajectoryRecord>& traj);
void export_trajectory(const std::vector<TrajectoryRecord>& traj, const std::filesystem::path& path);

struct MetricsRow {
    std::string case_id;
    MetricReport report;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);
void export_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

nlohmann::json corruption_to_json(const std::vector<CorruptionEvent>& events);

std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
    std::string path;
    std::string sha256;
    bool operator==(const FileDigest&) const = default;
};

struct RunManifest {
    std::string tool_version;
    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    std::map<std::string, double> timings_ms;
    bool operator==(const RunManifest&) const = default;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

nlohmann::json to_json(const RefineSettings& s);
nlohmann::json to_json(const PhantomConfig& c);
nlohmann::json to_json(const MetricOptions& m);

// Inverses of the above; keys missing from `j` keep their values in `base`.
RefineSettings refine_settings_from_json(const nlohmann::json& j, RefineSettings base = {});
PhantomConfig phantom_config_from_json(const nlohmann::json& j, PhantomConfig base = {});
MetricOptions metric_options_from_json(const nlohmann::json& j, MetricOptions base = {});

std::string to_string(Pooling pooling);
Pooling pooling_from_string(const std::string& name);

}  // namespace toposculpt::io
