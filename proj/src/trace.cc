#include "athena/trace.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

namespace athena {

namespace {

constexpr uint64_t kStreamCodeBase = 0x400000;
constexpr uint64_t kChaseCodeBase = 0x500000;

void put_u32(uint8_t* p, uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}
void put_u64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}
uint32_t get_u32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t{p[i]} << (8 * i);
  return v;
}
uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t{p[i]} << (8 * i);
  return v;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t load_period(double density) {
  if (!(density > 0.0) || density > 1.0) throw ArgumentError("load_density must be in (0, 1]");
  return static_cast<uint64_t>(std::llround(1.0 / density));
}

// Non-load slot j of a period: odd slots are branches, even slots are ALU ops.
bool is_branch_slot(uint64_t j) { return j % 2 == 1; }

}  // namespace

void encode_record(const TraceRecord& r, uint8_t out[kTraceRecordBytes]) {
  out[0] = static_cast<uint8_t>(r.kind);
  out[1] = static_cast<uint8_t>((r.taken ? 1 : 0) | (r.dependent ? 2 : 0));
  out[2] = 0;
  out[3] = 0;
  put_u64(out + 4, r.pc);
  put_u64(out + 12, r.addr);
}

TraceRecord decode_record(const uint8_t in[kTraceRecordBytes]) {
  if (in[0] > static_cast<uint8_t>(RecordKind::kOther))
    throw TraceError(TraceError::Code::kBadKind, "unknown record kind " + std::to_string(in[0]));
  TraceRecord r;
  r.kind = static_cast<RecordKind>(in[0]);
  r.taken = (in[1] & 1) != 0;
  r.dependent = (in[1] & 2) != 0;
  r.pc = get_u64(in + 4);
  r.addr = get_u64(in + 12);
  return r;
}

TraceReader::TraceReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw TraceError(TraceError::Code::kIo, "cannot open trace " + path);
  uint8_t buf[kTraceHeaderBytes];
  if (!in_.read(reinterpret_cast<char*>(buf), kTraceHeaderBytes))
    throw TraceError(TraceError::Code::kTruncatedFile, "trace header truncated: " + path);
  if (std::memcmp(buf, kTraceMagic, 4) != 0)
    throw TraceError(TraceError::Code::kBadMagic, "bad trace magic: " + path);
  header_.version = get_u32(buf + 4);
  header_.record_count = get_u64(buf + 8);
  if (header_.version != kTraceVersion)
    throw TraceError(TraceError::Code::kBadVersion,
                     "unsupported trace version " + std::to_string(header_.version));
  const uint64_t size = std::filesystem::file_size(path);
  const uint64_t expected = kTraceHeaderBytes + header_.record_count * kTraceRecordBytes;
  if (size != expected)
    throw TraceError(TraceError::Code::kTruncatedFile,
                     "trace " + path + " holds " + std::to_string(size) + " bytes, header implies " +
                         std::to_string(expected));
}

std::optional<TraceRecord> TraceReader::next() {
  if (consumed_ == header_.record_count) return std::nullopt;
  uint8_t buf[kTraceRecordBytes];
  if (!in_.read(reinterpret_cast<char*>(buf), kTraceRecordBytes))
    throw TraceError(TraceError::Code::kTruncatedFile, "trace truncated mid-record");
  ++consumed_;
  return decode_record(buf);
}

void TraceReader::rewind() {
  in_.clear();
  in_.seekg(kTraceHeaderBytes);
  consumed_ = 0;
}

std::vector<TraceRecord> read_trace(const std::string& path) {
  TraceReader reader(path);
  std::vector<TraceRecord> out;
  out.reserve(reader.header().record_count);
  while (auto r = reader.next()) out.push_back(*r);
  return out;
}

void write_trace(const std::string& path, std::span<const TraceRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError(TraceError::Code::kIo, "cannot write trace " + path);
  uint8_t header[kTraceHeaderBytes];
  std::memcpy(header, kTraceMagic, 4);
  put_u32(header + 4, kTraceVersion);
  put_u64(header + 8, records.size());
  out.write(reinterpret_cast<const char*>(header), kTraceHeaderBytes);
  uint8_t buf[kTraceRecordBytes];
  for (const auto& r : records) {
    encode_record(r, buf);
    out.write(reinterpret_cast<const char*>(buf), kTraceRecordBytes);
  }
  if (!out) throw TraceError(TraceError::Code::kIo, "short write to " + path);
}

std::vector<TraceRecord> generate_stream_trace(uint64_t n, uint64_t stride, uint64_t footprint,
                                               uint64_t seed, const GeneratorOptions& opt) {
  if (stride == 0) throw InvalidStride("stride must be nonzero");
  if (n == 0) throw ArgumentError("instruction count must be positive");
  if (footprint == 0 || footprint % stride != 0)
    throw ArgumentError("stride must divide footprint");
  const uint64_t period = load_period(opt.load_density);

  std::mt19937_64 branch_rng(splitmix64(seed));
  std::vector<TraceRecord> out;
  out.reserve(n);
  uint64_t offset = 0;
  uint64_t branches = 0;
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t j = i % period;
    TraceRecord r;
    r.pc = kStreamCodeBase + 4 * j;
    if (j == period - 1) {
      r.kind = RecordKind::kLoad;
      r.addr = opt.base + offset;
      offset = (offset + stride) % footprint;
    } else if (is_branch_slot(j)) {
      r.kind = RecordKind::kCondBranch;
      r.taken = opt.random_branches ? (branch_rng() & 1) != 0 : (branches++ % 4) != 3;
    } else {
      r.kind = RecordKind::kOther;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<TraceRecord> generate_pointer_chase_trace(uint64_t n, uint64_t nodes, uint64_t seed,
                                                      const GeneratorOptions& opt) {
  if (nodes < 2) throw ArgumentError("pointer chase needs at least 2 nodes");
  if (n == 0) throw ArgumentError("instruction count must be positive");
  const uint64_t period = load_period(opt.load_density);

  // Sattolo's shuffle yields a uniformly random single cycle.
  std::vector<uint64_t> succ(nodes);
  std::iota(succ.begin(), succ.end(), uint64_t{0});
  std::mt19937_64 perm_rng(seed);
  for (uint64_t i = nodes - 1; i > 0; --i) {
    std::uniform_int_distribution<uint64_t> pick(0, i - 1);
    std::swap(succ[i], succ[pick(perm_rng)]);
  }

  std::mt19937_64 branch_rng(splitmix64(seed));
  std::vector<TraceRecord> out;
  out.reserve(n);
  uint64_t node = 0;
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t j = i % period;
    TraceRecord r;
    r.pc = kChaseCodeBase + 4 * j;
    if (j == period - 1) {
      node = succ[node];
      r.kind = RecordKind::kLoad;
      r.addr = opt.base + node * 64;
      r.dependent = true;
    } else if (is_branch_slot(j)) {
      r.kind = RecordKind::kCondBranch;
      r.taken = (branch_rng() & 1) != 0;
    } else {
      r.kind = RecordKind::kOther;
    }
    out.push_back(r);
  }
  return out;
}

PhaseMixTrace generate_phase_mix_trace(std::span<const Segment> segments, uint64_t seed,
                                       const PhaseMixParams& params) {
  if (segments.empty()) throw ArgumentError("phase mix needs at least one segment");
  PhaseMixTrace mix;
  for (size_t k = 0; k < segments.size(); ++k) {
    const Segment& seg = segments[k];
    if (seg.n == 0) throw ArgumentError("phase mix segment with zero instructions");
    const uint64_t seg_seed = k == 0 ? seed : splitmix64(seed + k);
    GeneratorOptions opt;
    if (seg.load_density) opt.load_density = *seg.load_density;
    opt.random_branches = seg.random_branches;
    std::vector<TraceRecord> part;
    if (seg.kind == SegmentKind::kStream) {
      opt.base = k << 32;
      part = generate_stream_trace(seg.n, params.stride, params.footprint, seg_seed, opt);
    } else {
      opt.base = kChaseBase + (k << 32);
      part = generate_pointer_chase_trace(seg.n, params.nodes, seg_seed, opt);
    }
    mix.manifest.push_back({seg.kind, mix.records.size(), seg.n});
    mix.records.insert(mix.records.end(), part.begin(), part.end());
  }
  return mix;
}

std::string to_string(SegmentKind kind) { return kind == SegmentKind::kStream ? "stream" : "chase"; }

SegmentKind parse_segment_kind(const std::string& s) {
  if (s == "stream") return SegmentKind::kStream;
  if (s == "chase") return SegmentKind::kChase;
  throw ArgumentError("unknown segment kind '" + s + "'");
}

void write_manifest(const std::string& path, std::span<const SegmentBoundary> manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TraceError(TraceError::Code::kIo, "cannot write manifest " + path);
  out << "# kind start count\n";
  for (const auto& b : manifest) out << to_string(b.kind) << ' ' << b.start << ' ' << b.count << '\n';
}

std::vector<SegmentBoundary> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError(TraceError::Code::kIo, "cannot open manifest " + path);
  std::vector<SegmentBoundary> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string kind;
    SegmentBoundary b{};
    if (!(ss >> kind >> b.start >> b.count)) throw ArgumentError("malformed manifest line: " + line);
    b.kind = parse_segment_kind(kind);
    out.push_back(b);
  }
  return out;
}

}  // namespace athena
