#pragma once

// Epoch CSV format:
//
//   #meta attended_index=3 seed=12345
//   fs_hz,Pz,PO3,...
//   250,1.23457,-0.5,...
//
// The first column repeats the sampling rate on every row; remaining columns
// are one channel each, in uV, printed with 6 significant digits.
// attended_index is "none" for epochs without ground truth.

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mindlink/eeg_synth.hpp"

namespace mindlink {

namespace detail {

inline std::string format_g6(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("epoch csv: bad number '" + s + "'");
  }
  if (used != s.size()) throw InvalidArgument("epoch csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_epoch_csv(std::ostream& os, const EegEpoch& epoch) {
  os << "#meta attended_index=";
  if (epoch.attended_index)
    os << *epoch.attended_index;
  else
    os << "none";
  os << " seed=" << epoch.seed << '\n';
  os << "fs_hz";
  for (const auto& name : epoch.channel_names) os << ',' << name;
  os << '\n';
  const std::string fs = detail::format_g6(epoch.fs_hz);
  for (std::size_t k = 0; k < epoch.n_samples(); ++k) {
    os << fs;
    for (std::size_t c = 0; c < epoch.n_channels(); ++c)
      os << ',' << detail::format_g6(epoch.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)));
    os << '\n';
  }
}

inline EegEpoch read_epoch_csv(std::istream& is) {
  EegEpoch epoch;
  std::string line;
  if (!std::getline(is, line) || line.rfind("#meta", 0) != 0)
    throw InvalidArgument("epoch csv: missing #meta line");
  {
    std::istringstream meta(line.substr(5));
    std::string kv;
    while (meta >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidArgument("epoch csv: bad meta entry '" + kv + "'");
      const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
      if (key == "attended_index") {
        if (value != "none") epoch.attended_index = std::stoull(value);
      } else if (key == "seed") {
        epoch.seed = std::stoull(value);
      }
    }
  }
  if (!std::getline(is, line)) throw InvalidArgument("epoch csv: missing header");
  auto header = detail::split_csv(line);
  if (header.size() < 2 || header[0] != "fs_hz") throw InvalidArgument("epoch csv: header must start with fs_hz");
  epoch.channel_names.assign(header.begin() + 1, header.end());

  std::vector<std::vector<double>> columns(epoch.channel_names.size());
  bool have_fs = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) throw InvalidArgument("epoch csv: ragged row");
    const double fs = detail::parse_double(cells[0]);
    if (!have_fs) {
      epoch.fs_hz = fs;
      have_fs = true;
    } else if (fs != epoch.fs_hz) {
      throw InvalidArgument("epoch csv: fs_hz changes between rows");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) columns[c].push_back(detail::parse_double(cells[c + 1]));
  }
  if (!have_fs) throw InvalidArgument("epoch csv: no samples");
  const auto n = static_cast<Eigen::Index>(columns.front().size());
  epoch.samples.resize(static_cast<Eigen::Index>(columns.size()), n);
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (Eigen::Index k = 0; k < n; ++k)
      epoch.samples(static_cast<Eigen::Index>(c), k) = columns[c][static_cast<std::size_t>(k)];
  return epoch;
}

}  // namespace mindlink
