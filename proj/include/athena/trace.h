#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace athena {

enum class RecordKind : uint8_t { kLoad = 0, kStore = 1, kCondBranch = 2, kOther = 3 };

struct TraceRecord {
  RecordKind kind = RecordKind::kOther;
  uint64_t pc = 0;
  uint64_t addr = 0;  // 0 for kOther / kCondBranch
  bool taken = false; // only meaningful for kCondBranch
  // kLoad only: the address comes from the previous load's data, so the
  // access cannot start before that load completes.
  bool dependent = false;

  bool operator==(const TraceRecord&) const = default;
};

inline constexpr char kTraceMagic[4] = {'A', 'T', 'R', 'C'};
inline constexpr uint32_t kTraceVersion = 1;
inline constexpr size_t kTraceHeaderBytes = 16;
inline constexpr size_t kTraceRecordBytes = 20;

struct TraceHeader {
  uint32_t version = kTraceVersion;
  uint64_t record_count = 0;
};

class TraceError : public std::runtime_error {
 public:
  enum class Code { kBadMagic, kBadVersion, kTruncatedFile, kBadKind, kIo };
  TraceError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Thrown by generators on precondition violations.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidStride : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Streaming reader over the fixed-width binary format. Holds one record of
// state; the file size is validated against record_count on open.
class TraceReader {
 public:
  explicit TraceReader(const std::string& path);

  const TraceHeader& header() const { return header_; }
  std::optional<TraceRecord> next();
  void rewind();

 private:
  std::ifstream in_;
  TraceHeader header_;
  uint64_t consumed_ = 0;
};

std::vector<TraceRecord> read_trace(const std::string& path);
void write_trace(const std::string& path, std::span<const TraceRecord> records);

// Byte-level codec, exposed for tests.
void encode_record(const TraceRecord& r, uint8_t out[kTraceRecordBytes]);
TraceRecord decode_record(const uint8_t in[kTraceRecordBytes]);

struct GeneratorOptions {
  double load_density = 0.25;  // one LOAD every round(1/density) records
  uint64_t base = 0;           // first data address
  bool random_branches = false; // stream only: seeded outcomes instead of the periodic pattern
};

std::vector<TraceRecord> generate_stream_trace(uint64_t n, uint64_t stride, uint64_t footprint,
                                               uint64_t seed, const GeneratorOptions& opt = {});

inline constexpr uint64_t kChaseBase = uint64_t{1} << 40;

std::vector<TraceRecord> generate_pointer_chase_trace(uint64_t n, uint64_t nodes, uint64_t seed,
                                                      const GeneratorOptions& opt = {.base = kChaseBase});

enum class SegmentKind { kStream, kChase };

struct Segment {
  SegmentKind kind = SegmentKind::kStream;
  uint64_t n = 0;
  // Per-segment overrides of the generator defaults.
  std::optional<double> load_density;
  bool random_branches = false;
};

struct SegmentBoundary {
  SegmentKind kind;
  uint64_t start = 0;
  uint64_t count = 0;
};

struct PhaseMixParams {
  uint64_t stride = 8;
  uint64_t footprint = uint64_t{16} << 20;
  uint64_t nodes = uint64_t{1} << 20;
};

struct PhaseMixTrace {
  std::vector<TraceRecord> records;
  std::vector<SegmentBoundary> manifest;
};

PhaseMixTrace generate_phase_mix_trace(std::span<const Segment> segments, uint64_t seed,
                                       const PhaseMixParams& params = {});

void write_manifest(const std::string& path, std::span<const SegmentBoundary> manifest);
std::vector<SegmentBoundary> read_manifest(const std::string& path);

std::string to_string(SegmentKind kind);
SegmentKind parse_segment_kind(const std::string& s);

}  // namespace athena
