#include "athena/memory.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace athena {

const char* to_string(Level level) {
  switch (level) {
    case Level::kL1D: return "L1D";
    case Level::kL2C: return "L2C";
    case Level::kLLC: return "LLC";
    case Level::kDram: return "DRAM";
  }
  return "?";
}

void CacheLevelConfig::validate(const char* name) const {
  const std::string n(name);
  if (line_size != kLineBytes) throw std::invalid_argument(n + ": line size must be 64");
  if (associativity < 1 || capacity == 0 || capacity % (uint64_t{associativity} * line_size) != 0)
    throw std::invalid_argument(n + ": capacity must be divisible by associativity * line size");
  if (round_trip_latency < 1) throw std::invalid_argument(n + ": latency must be >= 1");
  if (mshr_count < 1) throw std::invalid_argument(n + ": mshr_count must be >= 1");
}

void DramConfig::validate() const {
  if (access_latency < 1 || bus_occupancy < 1 || queue_capacity < 1)
    throw std::invalid_argument("dram parameters must all be >= 1");
}

uint32_t occupancy_for_bandwidth(double gbs) {
  if (!(gbs > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  // 4 GHz core: bytes/cycle = gbs / 4, cycles per line = 64 / (gbs / 4).
  return static_cast<uint32_t>(std::lround(256.0 / gbs));
}

void HierarchyConfig::validate() const {
  l1d.validate("l1d");
  l2c.validate("l2c");
  llc.validate("llc");
  dram.validate();
}

Cache::Cache(const CacheLevelConfig& cfg)
    : cfg_(cfg), sets_(cfg.sets()), lines_(sets_ * cfg.associativity) {}

CacheLine* Cache::find(uint64_t line) {
  CacheLine* set = &lines_[(line % sets_) * cfg_.associativity];
  for (uint32_t w = 0; w < cfg_.associativity; ++w)
    if (set[w].valid && set[w].tag == line) return &set[w];
  return nullptr;
}

const CacheLine* Cache::find(uint64_t line) const { return const_cast<Cache*>(this)->find(line); }

std::optional<CacheLine> Cache::insert(uint64_t line, uint64_t ready, bool prefetched) {
  CacheLine* set = &lines_[(line % sets_) * cfg_.associativity];
  CacheLine* victim = &set[0];
  for (uint32_t w = 0; w < cfg_.associativity; ++w) {
    if (!set[w].valid) {
      victim = &set[w];
      break;
    }
    if (set[w].lru_stamp < victim->lru_stamp) victim = &set[w];
  }
  std::optional<CacheLine> evicted;
  if (victim->valid) evicted = *victim;
  *victim = CacheLine{line, true, prefetched, ++stamp_, ready};
  return evicted;
}

void Cache::invalidate(uint64_t line) {
  if (CacheLine* l = find(line)) l->valid = l->prefetched = false;
}

uint64_t Cache::valid_lines() const {
  return static_cast<uint64_t>(std::count_if(lines_.begin(), lines_.end(), [](const CacheLine& l) { return l.valid; }));
}

Dram::Dram(const DramConfig& cfg) : cfg_(cfg) {}

void Dram::retire_until(uint64_t cycle) {
  while (!by_completion_.empty() && by_completion_.top().first <= cycle) {
    auto [done, line] = by_completion_.top();
    by_completion_.pop();
    auto it = pending_.find(line);
    if (it != pending_.end() && it->second == done) pending_.erase(it);
  }
}

std::optional<uint64_t> Dram::in_flight(uint64_t line, uint64_t cycle) const {
  auto it = pending_.find(line);
  if (it == pending_.end() || it->second <= cycle) return std::nullopt;
  return it->second;
}

std::optional<uint64_t> Dram::enqueue(uint64_t line, RequestClass cls, uint64_t arrival) {
  retire_until(arrival);
  if (auto it = pending_.find(line); it != pending_.end()) {
    ++counters_.coalesced;
    return it->second;
  }
  if (by_completion_.size() >= cfg_.queue_capacity) {
    if (cls != RequestClass::kDemand) {
      ++(cls == RequestClass::kPrefetch ? counters_.dropped_prefetch : counters_.dropped_ocp);
      return std::nullopt;
    }
    arrival = by_completion_.top().first;
    retire_until(arrival);
  }
  const uint64_t start = std::max(arrival, bus_free_);
  const uint64_t done = start + cfg_.access_latency + cfg_.bus_occupancy;
  bus_free_ = start + cfg_.bus_occupancy;
  counters_.busy_cycles += cfg_.bus_occupancy;
  ++counters_.requests[static_cast<int>(cls)];
  pending_[line] = done;
  by_completion_.emplace(done, line);
  return done;
}

DramCounters Dram::take_counters() {
  DramCounters out = counters_;
  counters_ = DramCounters{};
  return out;
}

void MshrFile::expire(uint64_t cycle) {
  while (!busy_.empty() && busy_.top() <= cycle) busy_.pop();
}

bool MshrFile::full_at(uint64_t cycle) {
  expire(cycle);
  return busy_.size() >= capacity_;
}

uint64_t MshrFile::free_at(uint64_t cycle) {
  expire(cycle);
  while (busy_.size() >= capacity_) {
    cycle = busy_.top();
    expire(cycle);
  }
  return cycle;
}

Hierarchy::Hierarchy(const HierarchyConfig& cfg) : cfg_(cfg), dram_(cfg.dram) {
  cfg_.validate();
  caches_.emplace_back(cfg_.l1d);
  caches_.emplace_back(cfg_.l2c);
  caches_.emplace_back(cfg_.llc);
  mshrs_.emplace_back(cfg_.l1d.mshr_count);
  mshrs_.emplace_back(cfg_.l2c.mshr_count);
  mshrs_.emplace_back(cfg_.llc.mshr_count);
}

uint64_t Hierarchy::path_latency(Level level) const {
  uint64_t lat = cfg_.l1d.round_trip_latency;
  if (level >= Level::kL2C) lat += cfg_.l2c.round_trip_latency;
  if (level >= Level::kLLC) lat += cfg_.llc.round_trip_latency;
  return lat;
}

bool Hierarchy::contains(Level level, uint64_t line) const {
  return level != Level::kDram && cache(level).find(line) != nullptr;
}

void Hierarchy::fill(Level level, uint64_t line, uint64_t ready, bool prefetched, bool by_prefetch) {
  auto victim = at(level).insert(line, ready, prefetched);
  if (!victim) return;
  // Inclusion: a victim leaves every level above it.
  for (int up = static_cast<int>(level) - 1; up >= 0; --up) caches_[up].invalidate(victim->tag);
  if (level == Level::kLLC && on_llc_evict_) on_llc_evict_(victim->tag, by_prefetch);
}

void Hierarchy::clear_prefetched(uint64_t line) {
  for (auto& c : caches_)
    if (CacheLine* l = c.find(line)) l->prefetched = false;
}

AccessResult Hierarchy::demand_access(uint64_t line, uint64_t issue, std::optional<uint64_t> ocp_completion) {
  AccessResult res;
  for (Level level : {Level::kL1D, Level::kL2C, Level::kLLC}) {
    CacheLine* hit = at(level).find(line);
    if (!hit) continue;
    res.level = level;
    res.completion = std::max(issue + path_latency(level), hit->ready);
    res.first_use_of_prefetch = hit->prefetched;
    at(level).touch(*hit);
    if (hit->prefetched) clear_prefetched(line);
    for (int up = static_cast<int>(level) - 1; up >= 0; --up)
      fill(static_cast<Level>(up), line, res.completion, false, false);
    if (ocp_completion) res.completion = std::min(res.completion, *ocp_completion);
    return res;
  }

  // Off-chip. The L1D MSHR bounds outstanding demand misses; exhaustion delays the request.
  const uint64_t start = mshrs_[0].free_at(issue);
  uint64_t done = *dram_.enqueue(line, RequestClass::kDemand, start + path_latency(Level::kLLC));
  if (ocp_completion) done = std::min(done, *ocp_completion);
  mshrs_[0].add(done);
  res.level = Level::kDram;
  res.completion = done;
  ++counters_.llc_misses;
  ++counters_.demand_llc_misses;
  counters_.llc_miss_latency_sum += done - issue;
  fill(Level::kLLC, line, done, false, false);
  fill(Level::kL2C, line, done, false, false);
  fill(Level::kL1D, line, done, false, false);
  return res;
}

bool Hierarchy::prefetch_fill(uint64_t line, Level fill_level, uint64_t issue) {
  if (fill_level != Level::kL1D && fill_level != Level::kL2C)
    throw std::invalid_argument("prefetches fill L1D or L2C");
  if (!at(fill_level).config().fill_on_prefetch) return false;
  if (contains(fill_level, line)) {
    ++counters_.prefetch_duplicates;
    return false;
  }
  MshrFile& mshr = mshrs_[static_cast<int>(fill_level)];
  if (mshr.full_at(issue)) {
    ++counters_.prefetch_dropped;
    return false;
  }

  // Served by the nearest lower level holding the line, else by DRAM.
  uint64_t ready = 0;
  Level source = Level::kDram;
  for (int lvl = static_cast<int>(fill_level) + 1; lvl <= static_cast<int>(Level::kLLC); ++lvl) {
    if (const CacheLine* l = caches_[lvl].find(line)) {
      source = static_cast<Level>(lvl);
      ready = std::max(issue + path_latency(source) - path_latency(fill_level), l->ready);
      break;
    }
  }
  if (source == Level::kDram) {
    auto done = dram_.enqueue(line, RequestClass::kPrefetch,
                              issue + path_latency(Level::kLLC) - path_latency(fill_level));
    if (!done) {
      ++counters_.prefetch_dropped;
      return false;
    }
    ready = *done;
    ++counters_.llc_misses;
  }
  mshr.add(ready);
  for (int lvl = static_cast<int>(source) - 1; lvl >= static_cast<int>(fill_level); --lvl)
    fill(static_cast<Level>(lvl), line, ready, true, true);
  return true;
}

void Hierarchy::store_access(uint64_t line, uint64_t issue) {
  for (Level level : {Level::kL1D, Level::kL2C, Level::kLLC}) {
    if (CacheLine* hit = at(level).find(line)) {
      at(level).touch(*hit);
      if (hit->prefetched) clear_prefetched(line);
      for (int up = static_cast<int>(level) - 1; up >= 0; --up)
        fill(static_cast<Level>(up), line, std::max(issue + path_latency(level), hit->ready), false, false);
      return;
    }
  }
  // Write-allocate; the fetch consumes bandwidth but is off the retirement path.
  const uint64_t done = *dram_.enqueue(line, RequestClass::kDemand, issue + path_latency(Level::kLLC));
  ++counters_.llc_misses;
  fill(Level::kLLC, line, done, false, false);
  fill(Level::kL2C, line, done, false, false);
  fill(Level::kL1D, line, done, false, false);
}

void Hierarchy::drain_epoch(EpochTelemetry& epoch) {
  const DramCounters d = dram_.take_counters();
  epoch.dram_requests_demand += d.requests[0];
  epoch.dram_requests_prefetch += d.requests[1];
  epoch.dram_requests_ocp += d.requests[2];
  epoch.dram_busy_cycles += d.busy_cycles;
  epoch.llc_misses += counters_.llc_misses;
  epoch.demand_llc_misses += counters_.demand_llc_misses;
  epoch.llc_miss_latency_sum += counters_.llc_miss_latency_sum;
  counters_ = HierarchyCounters{};
}

double bandwidth_usage(const EpochTelemetry& epoch, uint64_t epoch_cycles) {
  if (epoch_cycles == 0) return 0.0;
  return std::clamp(static_cast<double>(epoch.dram_busy_cycles) / static_cast<double>(epoch_cycles), 0.0, 1.0);
}

}  // namespace athena
