#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace twinforge {

inline constexpr const char* kVersion = "0.1.0";

// Domain error types. Callers that reach a CLI boundary map these to exit
// codes: invariant violations -> 2, I/O -> 3.
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConflictError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StaleBatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed wire payload; `offset` is the byte position of the first
// undecodable input.
struct DecodeError : std::runtime_error {
  DecodeError(const std::string& msg, std::size_t offset_bytes)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset_bytes) + ")"),
        offset(offset_bytes) {}
  std::size_t offset;
};

struct TrainingDivergedError : std::runtime_error {
  TrainingDivergedError(const std::string& msg, int at_epoch, std::string at_layer)
      : std::runtime_error(msg + " (epoch " + std::to_string(at_epoch) + ", layer " + at_layer + ")"),
        epoch(at_epoch),
        layer(std::move(at_layer)) {}
  int epoch;
  std::string layer;
};

struct DegenerateLabelsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a selection gate (xi > threshold) admits no configuration.
struct GateError : std::runtime_error {
  GateError(const std::string& msg, double best)
      : std::runtime_error(msg), best_xi(best) {}
  double best_xi;
};

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

// Power-domain sum of two dBm quantities.
inline double dbm_add(double a_dbm, double b_dbm) {
  return mw_to_dbm(dbm_to_mw(a_dbm) + dbm_to_mw(b_dbm));
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Fixed 6-significant-digit rendering used by every report writer so that
// identical inputs always serialize to identical bytes.
inline std::string fmt_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace twinforge
