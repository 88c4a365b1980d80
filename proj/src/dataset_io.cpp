#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "flowconv/ingest.hpp"
#include "json.hpp"

namespace flowconv {

namespace {

constexpr const char* kDatasetMagic = "FCDS1";

nlohmann::json grid_json(const GridSpec& g) {
  return {{"lat_min", g.lat_min}, {"lat_max", g.lat_max}, {"lon_min", g.lon_min},
          {"lon_max", g.lon_max}, {"m", g.m},             {"k", g.k},
          {"interval_seconds", g.interval_seconds},       {"t0", g.t0}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.lat_min = j.at("lat_min").get<double>();
  g.lat_max = j.at("lat_max").get<double>();
  g.lon_min = j.at("lon_min").get<double>();
  g.lon_max = j.at("lon_max").get<double>();
  g.m = j.at("m").get<int>();
  g.k = j.at("k").get<int>();
  g.interval_seconds = j.at("interval_seconds").get<std::int64_t>();
  g.t0 = j.at("t0").get<std::int64_t>();
  return g;
}

}  // namespace

void write_dataset(std::ostream& out, const IntervalSeries& series) {
  using namespace detail;
  const auto& g = series.grid;
  nlohmann::json meta = {
      {"intervals", series.intervals()},
      {"volume_shape", {g.m, g.k, 2}},
      {"regions", g.regions()},
      {"grid", grid_json(g)},
      {"rejected",
       {{"out_of_bounds", series.rejected.out_of_bounds},
        {"reversed_time", series.rejected.reversed_time},
        {"outside_axis", series.rejected.outside_axis},
        {"malformed", series.rejected.malformed}}},
  };
  out.write(kDatasetMagic, 5);
  put_block(out, meta.dump());
  for (std::size_t i = 0; i < series.intervals(); ++i) {
    const auto& v = series.volumes[i].values;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) put_f64(out, v(r, c));
    const auto& f = series.flows[i];
    put_le(out, static_cast<std::uint32_t>(f.entries.size()));
    for (const auto& e : f.entries) {
      put_le(out, static_cast<std::uint32_t>(e.src));
      put_le(out, static_cast<std::uint32_t>(e.dst));
      put_f64(out, e.weight);
    }
  }
  if (!out) throw std::runtime_error("write_dataset: stream error");
}

IntervalSeries read_dataset(std::istream& in) {
  using namespace detail;
  expect_magic(in, kDatasetMagic);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(get_block(in, "dataset metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset metadata: ") + e.what());
  }
  IntervalSeries series;
  try {
    series.grid = grid_from_json(meta.at("grid"));
    const auto& rej = meta.at("rejected");
    series.rejected.out_of_bounds = rej.at("out_of_bounds").get<std::size_t>();
    series.rejected.reversed_time = rej.at("reversed_time").get<std::size_t>();
    series.rejected.outside_axis = rej.at("outside_axis").get<std::size_t>();
    series.rejected.malformed = rej.at("malformed").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset metadata: ") + e.what());
  }
  const auto count = meta.at("intervals").get<std::size_t>();
  const int n = series.grid.regions();
  for (std::size_t i = 0; i < count; ++i) {
    VolumeTensor v{series.grid.m, series.grid.k, static_cast<std::int64_t>(i) + 1, Signal(n, 2)};
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < 2; ++c) v.values(r, c) = get_f64(in, "volume tensor");
    SparseFlowMatrix f{n, {}};
    const auto entries = get_le<std::uint32_t>(in, "flow entry count");
    f.entries.reserve(entries);
    for (std::uint32_t e = 0; e < entries; ++e) {
      const auto src = get_le<std::uint32_t>(in, "flow entry");
      const auto dst = get_le<std::uint32_t>(in, "flow entry");
      const double w = get_f64(in, "flow entry");
      if (src >= static_cast<std::uint32_t>(n) || dst >= static_cast<std::uint32_t>(n))
        throw FormatError("flow entry index out of range");
      f.entries.push_back({static_cast<int>(src), static_cast<int>(dst), w});
    }
    series.volumes.push_back(std::move(v));
    series.flows.push_back(std::move(f));
  }
  return series;
}

void write_dataset_file(const std::string& path, const IntervalSeries& series) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
  write_dataset(out, series);
}

IntervalSeries read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

}  // namespace flowconv
