#include "toposculpt/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

namespace toposculpt::io {

static_assert(std::endian::native == std::endian::little, "file I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kRvolMagic{'T', 'S', 'R', 'V', 'O', 'L', '\0', '\0'};
constexpr std::uint32_t kRvolVersion = 1;
constexpr std::size_t kRvolHeaderSize = 72;
constexpr std::size_t kNiftiHeaderSize = 348;
constexpr std::size_t kNiftiDataOffset = 352;

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <typename T>
T load(const std::vector<char>& buf, std::size_t offset) {
    T v;
    std::memcpy(&v, buf.data() + offset, sizeof(T));
    return v;
}

template <typename T>
void store(std::vector<char>& buf, std::size_t offset, T v) {
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::uint8: return 1;
        case DType::int16: return 2;
        case DType::float32: return 4;
        case DType::float64: return 8;
    }
    return 0;
}

std::vector<double> decode_payload(const std::vector<char>& buf, std::size_t offset, std::size_t count, DType t) {
    std::vector<double> out(count);
    const char* p = buf.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
        switch (t) {
            case DType::uint8: out[i] = static_cast<unsigned char>(p[i]); break;
            case DType::int16: {
                std::int16_t v;
                std::memcpy(&v, p + 2 * i, 2);
                out[i] = v;
                break;
            }
            case DType::float32: {
                float v;
                std::memcpy(&v, p + 4 * i, 4);
                out[i] = v;
                break;
            }
            case DType::float64: std::memcpy(&out[i], p + 8 * i, 8); break;
        }
    }
    return out;
}

std::vector<char> encode_payload(const Volume& v, DType t) {
    std::vector<char> out(v.size() * dtype_size(t));
    char* p = out.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i];
        switch (t) {
            case DType::uint8: {
                if (!(x >= 0.0 && x <= 255.0) || x != std::floor(x)) {
                    throw FormatError(FormatErrorCode::unsupported_dtype, "value not representable as uint8");
                }
                p[i] = static_cast<char>(static_cast<unsigned char>(x));
                break;
            }
            case DType::int16: {
                if (!(x >= -32768.0 && x <= 32767.0) || x != std::floor(x)) {
                    throw FormatError(FormatErrorCode::unsupported_dtype, "value not representable as int16");
                }
                const auto s = static_cast<std::int16_t>(x);
                std::memcpy(p + 2 * i, &s, 2);
                break;
            }
            case DType::float32: {
                const auto f = static_cast<float>(x);
                std::memcpy(p + 4 * i, &f, 4);
                break;
            }
            case DType::float64: std::memcpy(p + 8 * i, &x, 8); break;
        }
    }
    return out;
}

Role infer_role(const std::vector<double>& data, DType t) {
    const bool zero_one = std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0 || v == 1.0; });
    if (t == DType::uint8 && zero_one) return Role::binary;
    const bool unit = std::all_of(data.begin(), data.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    return unit && t != DType::int16 ? Role::probability : Role::logit;
}

bool has_suffix(const fs::path& p, const std::string& ext) {
    std::string s = p.string();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s.size() >= ext.size() && s.compare(s.size() - ext.size(), ext.size(), ext) == 0;
}

Volume read_rvol(const std::vector<char>& buf, const fs::path& path) {
    if (buf.size() < kRvolHeaderSize) {
        throw FormatError(FormatErrorCode::malformed_header, "'" + path.string() + "' shorter than the .rvol header");
    }
    if (!std::equal(kRvolMagic.begin(), kRvolMagic.end(), buf.begin())) {
        throw FormatError(FormatErrorCode::malformed_header, "'" + path.string() + "' has no .rvol magic");
    }
    if (load<std::uint32_t>(buf, 8) != kRvolVersion) {
        throw FormatError(FormatErrorCode::malformed_header, "unsupported .rvol version");
    }
    const Dims dims{load<std::int64_t>(buf, 16), load<std::int64_t>(buf, 24), load<std::int64_t>(buf, 32)};
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0 || dims.nx > (1 << 20) || dims.ny > (1 << 20) ||
        dims.nz > (1 << 20)) {
        throw FormatError(FormatErrorCode::malformed_header, "implausible .rvol dims");
    }
    const Spacing sp{load<double>(buf, 40), load<double>(buf, 48), load<double>(buf, 56)};
    if (!(sp.x > 0.0 && sp.y > 0.0 && sp.z > 0.0) || !std::isfinite(sp.x) || !std::isfinite(sp.y) ||
        !std::isfinite(sp.z)) {
        throw FormatError(FormatErrorCode::malformed_header, "non-positive .rvol spacing");
    }
    const auto dtype_code = load<std::uint32_t>(buf, 64);
    if (dtype_code < 1 || dtype_code > 4) {
        throw FormatError(FormatErrorCode::unsupported_dtype, ".rvol dtype code " + std::to_string(dtype_code));
    }
    const auto dtype = static_cast<DType>(dtype_code);
    const auto role_code = load<std::uint32_t>(buf, 68);
    if (role_code > 2) throw FormatError(FormatErrorCode::malformed_header, ".rvol role code " + std::to_string(role_code));
    const std::size_t need = kRvolHeaderSize + dims.count() * dtype_size(dtype);
    if (buf.size() < need) {
        throw FormatError(FormatErrorCode::truncated_payload, "'" + path.string() + "' holds " +
                                                                   std::to_string(buf.size()) + " bytes, expected " +
                                                                   std::to_string(need));
    }
    static constexpr Role roles[] = {Role::probability, Role::logit, Role::binary};
    return Volume(dims, sp, roles[role_code], decode_payload(buf, kRvolHeaderSize, dims.count(), dtype));
}

Volume read_nifti(const std::vector<char>& buf, const fs::path& path) {
    if (buf.size() >= 2 && static_cast<unsigned char>(buf[0]) == 0x1f && static_cast<unsigned char>(buf[1]) == 0x8b) {
        throw FormatError(FormatErrorCode::unsupported_compression, "'" + path.string() + "' is gzip-compressed");
    }
    if (buf.size() < kNiftiHeaderSize) {
        throw FormatError(FormatErrorCode::malformed_header, "'" + path.string() + "' shorter than a NIfTI-1 header");
    }
    const auto sizeof_hdr = load<std::int32_t>(buf, 0);
    if (sizeof_hdr != 348) {
        if (sizeof_hdr == 0x5C010000) {
            throw FormatError(FormatErrorCode::malformed_header, "big-endian NIfTI is not supported");
        }
        throw FormatError(FormatErrorCode::malformed_header, "sizeof_hdr is not 348");
    }
    if (std::memcmp(buf.data() + 344, "n+1\0", 4) != 0) {
        throw FormatError(FormatErrorCode::malformed_header, "magic is not 'n+1' (only single-file NIfTI-1 is supported)");
    }
    std::array<std::int16_t, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(buf, 40 + 2 * i);
    if (dim[0] < 1 || dim[0] > 7) throw FormatError(FormatErrorCode::malformed_header, "dim[0] out of range");
    if (dim[0] > 4) {
        throw FormatError(FormatErrorCode::unsupported_dimensionality, std::to_string(dim[0]) + "-D images are not supported");
    }
    for (int i = 1; i <= dim[0]; ++i) {
        if (dim[i] < 1) throw FormatError(FormatErrorCode::malformed_header, "non-positive dim entry");
    }
    if (dim[0] == 4 && dim[4] != 1) {
        throw FormatError(FormatErrorCode::unsupported_dimensionality, "4-D image with dim[4] = " + std::to_string(dim[4]));
    }
    const Dims dims{dim[1], dim[0] >= 2 ? dim[2] : 1, dim[0] >= 3 ? dim[3] : 1};

    const auto datatype = load<std::int16_t>(buf, 70);
    DType dtype;
    switch (datatype) {
        case 2: dtype = DType::uint8; break;
        case 4: dtype = DType::int16; break;
        case 16: dtype = DType::float32; break;
        default:
            throw FormatError(FormatErrorCode::unsupported_dtype, "NIfTI datatype " + std::to_string(datatype) +
                                                                      " (supported: uint8, int16, float32)");
    }
    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[i] = load<float>(buf, 76 + 4 * i);
    const Spacing sp{pixdim[1], dim[0] >= 2 ? pixdim[2] : 1.0f, dim[0] >= 3 ? pixdim[3] : 1.0f};
    if (!(sp.x > 0.0 && sp.y > 0.0 && sp.z > 0.0)) {
        throw FormatError(FormatErrorCode::malformed_header, "pixdim spacing must be positive");
    }
    const float vox_offset = load<float>(buf, 108);
    if (!(vox_offset >= static_cast<float>(kNiftiDataOffset))) {
        throw FormatError(FormatErrorCode::malformed_header, "vox_offset below 352");
    }
    const auto offset = static_cast<std::size_t>(vox_offset);
    const std::size_t need = offset + dims.count() * dtype_size(dtype);
    if (buf.size() < need) {
        throw FormatError(FormatErrorCode::truncated_payload, "'" + path.string() + "' holds " +
                                                                   std::to_string(buf.size()) + " bytes, expected " +
                                                                   std::to_string(need));
    }
    std::vector<double> data = decode_payload(buf, offset, dims.count(), dtype);
    const float slope = load<float>(buf, 112);
    const float inter = load<float>(buf, 116);
    if (slope != 0.0f && std::isfinite(slope) && (slope != 1.0f || inter != 0.0f)) {
        for (double& v : data) v = v * slope + inter;
        dtype = DType::float32;
    }
    const Role role = infer_role(data, dtype);
    return Volume(dims, sp, role, std::move(data));
}

void write_bytes(const fs::path& path, const std::vector<char>& header, const std::vector<char>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorCode::unwritable_path, "cannot write '" + path.string() + "'");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw FormatError(FormatErrorCode::unwritable_path, "write failed for '" + path.string() + "'");
}

std::uint32_t role_code(Role r) {
    switch (r) {
        case Role::probability: return 0;
        case Role::logit: return 1;
        case Role::binary: return 2;
    }
    return 1;
}

}  // namespace

std::string to_string(FormatErrorCode code) {
    switch (code) {
        case FormatErrorCode::unknown_extension: return "unknown extension";
        case FormatErrorCode::malformed_header: return "malformed header";
        case FormatErrorCode::truncated_payload: return "truncated payload";
        case FormatErrorCode::unsupported_dtype: return "unsupported dtype";
        case FormatErrorCode::unsupported_compression: return "compression unsupported";
        case FormatErrorCode::unsupported_dimensionality: return "unsupported dimensionality";
        case FormatErrorCode::unwritable_path: return "unwritable path";
    }
    return "format error";
}

Volume read_volume(const fs::path& path) {
    if (has_suffix(path, ".gz")) {
        throw FormatError(FormatErrorCode::unsupported_compression, "'" + path.string() + "': .gz input is not supported");
    }
    const bool rvol = has_suffix(path, ".rvol");
    const bool nii = has_suffix(path, ".nii");
    if (!rvol && !nii) {
        throw FormatError(FormatErrorCode::unknown_extension, "'" + path.string() + "' (expected .rvol or .nii)");
    }
    const std::vector<char> buf = read_bytes(path);
    return rvol ? read_rvol(buf, path) : read_nifti(buf, path);
}

Volume read_volume(const fs::path& path, Role role) {
    Volume v = read_volume(path);
    return v.role() == role ? v : v.retagged(role);
}

void write_volume(const Volume& v, const fs::path& path, std::optional<DType> dtype) {
    const bool rvol = has_suffix(path, ".rvol");
    const bool nii = has_suffix(path, ".nii");
    if (!rvol && !nii) {
        throw FormatError(FormatErrorCode::unknown_extension, "'" + path.string() + "' (expected .rvol or .nii)");
    }
    const DType t = dtype.value_or(v.role() == Role::binary ? DType::uint8 : (rvol ? DType::float64 : DType::float32));
    const std::vector<char> payload = encode_payload(v, t);

    if (rvol) {
        std::vector<char> h(kRvolHeaderSize, 0);
        std::copy(kRvolMagic.begin(), kRvolMagic.end(), h.begin());
        store<std::uint32_t>(h, 8, kRvolVersion);
        store<std::int64_t>(h, 16, v.dims().nx);
        store<std::int64_t>(h, 24, v.dims().ny);
        store<std::int64_t>(h, 32, v.dims().nz);
        store<double>(h, 40, v.spacing().x);
        store<double>(h, 48, v.spacing().y);
        store<double>(h, 56, v.spacing().z);
        store<std::uint32_t>(h, 64, static_cast<std::uint32_t>(t));
        store<std::uint32_t>(h, 68, role_code(v.role()));
        write_bytes(path, h, payload);
        return;
    }

    if (t == DType::float64) throw FormatError(FormatErrorCode::unsupported_dtype, "NIfTI output supports uint8/int16/float32");
    const auto& d = v.dims();
    if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767) {
        throw FormatError(FormatErrorCode::unsupported_dimensionality, "NIfTI-1 dims are limited to 32767");
    }
    std::vector<char> h(kNiftiDataOffset, 0);
    store<std::int32_t>(h, 0, 348);
    const std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                 static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) store<std::int16_t>(h, 40 + 2 * i, dim[i]);
    const std::int16_t datatype = t == DType::uint8 ? 2 : (t == DType::int16 ? 4 : 16);
    store<std::int16_t>(h, 70, datatype);
    store<std::int16_t>(h, 72, static_cast<std::int16_t>(8 * dtype_size(t)));
    const float pixdim[8] = {1.0f, static_cast<float>(v.spacing().x), static_cast<float>(v.spacing().y),
                             static_cast<float>(v.spacing().z), 0.0f, 0.0f, 0.0f, 0.0f};
    for (int i = 0; i < 8; ++i) store<float>(h, 76 + 4 * i, pixdim[i]);
    store<float>(h, 108, static_cast<float>(kNiftiDataOffset));
    store<float>(h, 112, 1.0f);
    h[123] = 2;  // xyzt_units: millimetres
    std::memcpy(h.data() + 344, "n+1\0", 4);
    write_bytes(path, h, payload);
}

Volume centerline_volume(const CenterlineTruth& cl, const Volume& like) {
    Volume out(like.dims(), like.spacing(), Role::logit, 0.0);
    for (std::size_t b = 0; b < cl.branches.size(); ++b) {
        for (const VoxelCoord& v : cl.branches[b]) out.at(v) = static_cast<double>(b + 1);
    }
    return out;
}

CenterlineTruth centerline_from_volume(const Volume& labels) {
    CenterlineTruth cl;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double v = labels[i];
        if (v == 0.0) continue;
        if (!(v >= 1.0) || v != std::floor(v)) throw InputError("centerline volume holds a non-integer label");
        const auto b = static_cast<std::size_t>(v) - 1;
        if (cl.branches.size() <= b) cl.branches.resize(b + 1);
        cl.branches[b].push_back(labels.coord(i));
    }
    for (std::size_t b = 0; b < cl.branches.size(); ++b) {
        if (cl.branches[b].empty()) throw InputError("centerline branch ids are not contiguous (missing " + std::to_string(b) + ")");
    }
    cl.flatten();
    return cl;
}

std::string format_float(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

double rounded9(double v) { return std::stod(format_float(v)); }

nlohmann::json voxel_json(const VoxelCoord& c) { return nlohmann::json::array({c.x, c.y, c.z}); }

VoxelCoord voxel_from_json(const nlohmann::json& j) {
    return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), j.at(2).get<std::int64_t>()};
}

}  // namespace

nlohmann::json barcode_to_json(const Barcode& b) {
    nlohmann::json arr = nlohmann::json::array();
    for (const PersistencePair& p : b.pairs) {
        nlohmann::json o;
        o["dim"] = 0;
        o["birth"] = rounded9(p.birth);
        o["death"] = rounded9(p.death);
        o["birth_voxel"] = voxel_json(p.birth_voxel);
        if (p.death_voxel) o["death_voxel"] = voxel_json(*p.death_voxel);
        o["essential"] = p.essential;
        arr.push_back(std::move(o));
    }
    return arr;
}

Barcode barcode_from_json(const nlohmann::json& j) {
    Barcode b;
    for (const auto& o : j) {
        PersistencePair p;
        p.birth = o.at("birth").get<double>();
        p.death = o.at("death").get<double>();
        p.birth_voxel = voxel_from_json(o.at("birth_voxel"));
        if (o.contains("death_voxel")) p.death_voxel = voxel_from_json(o.at("death_voxel"));
        p.essential = o.at("essential").get<bool>();
        b.pairs.push_back(p);
    }
    return b;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorCode::unwritable_path, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw FormatError(FormatErrorCode::unwritable_path, "write failed for '" + path.string() + "'");
}

void export_barcode(const Barcode& b, const fs::path& path) { write_text(path, barcode_to_json(b).dump() + "\n"); }

std::string trajectory_csv(const std::vector<TrajectoryRecord>& traj) {
    std::ostringstream os;
    os << kTrajectoryHeader << "\n";
    for (const auto& r : traj) {
        os << r.iteration << "," << r.beta0 << "," << format_float(r.l_cor) << "," << format_float(r.l_com_voxel) << ","
           << format_float(r.l_com_struct) << "," << format_float(r.l_total) << "," << (r.ph_recomputed ? 1 : 0)
           << "\n";
    }
    return os.str();
}

void export_trajectory(const std::vector<TrajectoryRecord>& traj, const fs::path& path) {
    write_text(path, trajectory_csv(traj));
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << kMetricsHeader << "\n";
    for (const auto& row : rows) {
        const MetricReport& r = row.report;
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        os << row.case_id << "," << format_float(r.cldice_pct) << "," << format_float(r.nsdice_pct) << ","
           << format_float(r.hd95_mm) << "," << format_float(r.bd_pct) << "," << format_float(r.td_pct) << ","
           << r.betti0_error << "," << flags << "\n";
    }
    return os.str();
}

void export_metrics(const std::vector<MetricsRow>& rows, const fs::path& path) { write_text(path, metrics_csv(rows)); }

nlohmann::json corruption_to_json(const std::vector<CorruptionEvent>& events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) {
        nlohmann::json o;
        o["kind"] = to_string(e.kind);
        o["center"] = voxel_json(e.center);
        o["radii"] = {e.radii[0], e.radii[1], e.radii[2]};
        if (e.kind == CorruptionEvent::Kind::break_) o["branch"] = e.branch;
        arr.push_back(std::move(o));
    }
    return arr;
}

std::string sha256_file(const fs::path& path) {
    const std::vector<char> bytes = read_bytes(path);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md.data(), &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw InputError("sha256 failed for '" + path.string() + "'");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

void to_json(nlohmann::json& j, const RunManifest& m) {
    auto digests = [](const std::vector<FileDigest>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& d : v) a.push_back({{"path", d.path}, {"sha256", d.sha256}});
        return a;
    };
    j = nlohmann::json{{"tool_version", m.tool_version},
                       {"subcommand", m.subcommand},
                       {"config", m.config},
                       {"inputs", digests(m.inputs)},
                       {"outputs", digests(m.outputs)},
                       {"timings_ms", m.timings_ms}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
    auto digests = [](const nlohmann::json& a) {
        std::vector<FileDigest> v;
        for (const auto& d : a) v.push_back({d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
        return v;
    };
    m.tool_version = j.at("tool_version").get<std::string>();
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config = j.at("config");
    m.inputs = digests(j.at("inputs"));
    m.outputs = digests(j.at("outputs"));
    m.timings_ms = j.at("timings_ms").get<std::map<std::string, double>>();
}

void write_manifest(const RunManifest& m, const fs::path& path) {
    write_text(path, nlohmann::json(m).dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in).get<RunManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrorCode::malformed_header, "manifest '" + path.string() + "': " + e.what());
    }
}

nlohmann::json to_json(const RefineSettings& s) {
    return {
        {"prior_beta0", s.prior.beta0},
        {"alpha", s.weights.alpha},
        {"beta", s.weights.beta},
        {"gamma", s.weights.gamma},
        {"t", s.curriculum.t},
        {"T", s.curriculum.T},
        {"k", s.curriculum.k},
        {"optimizer", to_string(s.optimizer.method)},
        {"lr", s.optimizer.learning_rate},
        {"adam_beta1", s.optimizer.beta1},
        {"adam_beta2", s.optimizer.beta2},
        {"weight_decay", s.optimizer.weight_decay},
        {"adam_epsilon", s.optimizer.epsilon},
        {"skeleton_iterations", s.skeleton.iterations},
        {"skeleton_pooling", to_string(s.skeleton.pooling)},
        {"connectivity", to_int(s.connectivity)},
    };
}

nlohmann::json to_json(const PhantomConfig& c) {
    return {
        {"size", {c.dims.nx, c.dims.ny, c.dims.nz}},
        {"spacing", {c.spacing.x, c.spacing.y, c.spacing.z}},
        {"seed", c.seed},
        {"generations", c.generations},
        {"root_radius", c.root_radius},
        {"radius_decay", c.radius_decay},
        {"length_range", {c.min_length, c.max_length}},
        {"length_decay", c.length_decay},
        {"angle_range_deg", {c.min_angle_deg, c.max_angle_deg}},
        {"breaks", c.breaks},
        {"break_margin_range", {c.break_margin_min, c.break_margin_max}},
        {"blobs", c.blobs},
        {"blob_radius_range", {c.blob_radius_min, c.blob_radius_max}},
        {"blob_clearance", c.blob_clearance},
        {"noise", c.noise},
        {"foreground_prob", c.foreground_prob},
        {"background_prob", c.background_prob},
        {"max_retries", c.max_retries},
    };
}

nlohmann::json to_json(const MetricOptions& m) {
    return {
        {"nsd_tolerance_mm", m.nsd_tolerance_mm},
        {"skeleton_iterations", m.skeleton.iterations},
        {"skeleton_pooling", to_string(m.skeleton.pooling)},
        {"connectivity", to_int(m.connectivity)},
    };
}

std::string to_string(Pooling pooling) { return pooling == Pooling::separable3 ? "separable3" : "cubic3"; }

Pooling pooling_from_string(const std::string& name) {
    if (name == "separable3") return Pooling::separable3;
    if (name == "cubic3") return Pooling::cubic3;
    throw UsageError("unknown pooling '" + name + "' (separable3 or cubic3)");
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

template <typename T>
void take_pair(const nlohmann::json& j, const char* key, T& first, T& second) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw InputError(std::string("config key '") + key + "' must be a pair");
    first = a.at(0).get<T>();
    second = a.at(1).get<T>();
}

}  // namespace

RefineSettings refine_settings_from_json(const nlohmann::json& j, RefineSettings s) {
    try {
        take(j, "prior_beta0", s.prior.beta0);
        take(j, "alpha", s.weights.alpha);
        take(j, "beta", s.weights.beta);
        take(j, "gamma", s.weights.gamma);
        take(j, "t", s.curriculum.t);
        take(j, "T", s.curriculum.T);
        take(j, "k", s.curriculum.k);
        if (j.contains("optimizer")) s.optimizer.method = optimizer_from_string(j.at("optimizer").get<std::string>());
        take(j, "lr", s.optimizer.learning_rate);
        take(j, "adam_beta1", s.optimizer.beta1);
        take(j, "adam_beta2", s.optimizer.beta2);
        take(j, "weight_decay", s.optimizer.weight_decay);
        take(j, "adam_epsilon", s.optimizer.epsilon);
        take(j, "skeleton_iterations", s.skeleton.iterations);
        if (j.contains("skeleton_pooling")) s.skeleton.pooling = pooling_from_string(j.at("skeleton_pooling").get<std::string>());
        if (j.contains("connectivity")) s.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("refine config: ") + e.what());
    }
    return s;
}

PhantomConfig phantom_config_from_json(const nlohmann::json& j, PhantomConfig c) {
    try {
        if (j.contains("size")) {
            const auto& a = j.at("size");
            c.dims = {a.at(0).get<std::int64_t>(), a.at(1).get<std::int64_t>(), a.at(2).get<std::int64_t>()};
        }
        if (j.contains("spacing")) {
            const auto& a = j.at("spacing");
            c.spacing = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        }
        take(j, "seed", c.seed);
        take(j, "generations", c.generations);
        take(j, "root_radius", c.root_radius);
        take(j, "radius_decay", c.radius_decay);
        take_pair(j, "length_range", c.min_length, c.max_length);
        take(j, "length_decay", c.length_decay);
        take_pair(j, "angle_range_deg", c.min_angle_deg, c.max_angle_deg);
        take(j, "breaks", c.breaks);
        take_pair(j, "break_margin_range", c.break_margin_min, c.break_margin_max);
        take(j, "blobs", c.blobs);
        take_pair(j, "blob_radius_range", c.blob_radius_min, c.blob_radius_max);
        take(j, "blob_clearance", c.blob_clearance);
        take(j, "noise", c.noise);
        take(j, "foreground_prob", c.foreground_prob);
        take(j, "background_prob", c.background_prob);
        take(j, "max_retries", c.max_retries);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("phantom config: ") + e.what());
    }
    return c;
}

MetricOptions metric_options_from_json(const nlohmann::json& j, MetricOptions m) {
    try {
        take(j, "nsd_tolerance_mm", m.nsd_tolerance_mm);
        take(j, "skeleton_iterations", m.skeleton.iterations);
        if (j.contains("skeleton_pooling")) m.skeleton.pooling = pooling_from_string(j.at("skeleton_pooling").get<std::string>());
        if (j.contains("connectivity")) m.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("metric config: ") + e.what());
    }
    return m;
}

}  // namespace toposculpt::io
