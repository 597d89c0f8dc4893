#include "timecsl/transform.hpp"

namespace timecsl {

Encoding encode(const ShapeletTransformer& f, const Eigen::MatrixXd& x) {
  if (x.rows() != f.channel_count())
    throw ContractError("channel mismatch: series has " + std::to_string(x.rows()) + " channels, transformer expects " +
                        std::to_string(f.channel_count()));
  const auto& groups = f.groups();
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (x.cols() < groups[g].length)
      throw LengthError("series length " + std::to_string(x.cols()) + " is shorter than group " + std::to_string(g) +
                        " (" + std::string(to_string(groups[g].metric)) + ", length " +
                        std::to_string(groups[g].length) + ")");

  Encoding enc;
  enc.z.resize(f.repr_dim());
  enc.windows.resize(static_cast<std::size_t>(f.repr_dim()));
  for (Index id = 0; id < f.repr_dim(); ++id) {
    const auto& grp = f.group_for(id);
    const auto fv = detail::feature_raw(grp.metric, x.data(), x.rows(), x.cols(), f.values(id).data(), grp.length);
    enc.z[id] = fv.value;
    enc.windows[static_cast<std::size_t>(id)] = fv.window_start;
  }
  return enc;
}

Representation transform(const TimeSeries& x, const ShapeletTransformer& f) {
  return {x.id(), encode(f, x.values()).z};
}

Eigen::MatrixXd transform_dataset(const Dataset& ds, const ShapeletTransformer& f) {
  Eigen::MatrixXd out(static_cast<Index>(ds.size()), f.repr_dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    try {
      out.row(static_cast<Index>(i)) = encode(f, ds[i].values()).z.transpose();
    } catch (const LengthError& e) {
      throw LengthError("series '" + ds[i].id() + "': " + e.what());
    } catch (const ContractError& e) {
      throw ContractError("series '" + ds[i].id() + "': " + e.what());
    }
  }
  return out;
}

MatchResult match(const TimeSeries& x, const Shapelet& s, Metric metric) {
  const auto fv = feature(metric, x.values(), s.values);
  return {s.id, x.id(), metric, fv.value, fv.window_start, x.values().middleCols(fv.window_start, s.values.cols())};
}

MatchResult match(const TimeSeries& x, const ShapeletTransformer& f, Index shapelet_id) {
  if (shapelet_id < 0 || shapelet_id >= f.repr_dim())
    throw ContractError("shapelet id " + std::to_string(shapelet_id) + " outside [0, " +
                        std::to_string(f.repr_dim()) + ")");
  return match(x, f.shapelet(shapelet_id), f.group_for(shapelet_id).metric);
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& reprs, const std::vector<Index>& ids) {
  Eigen::MatrixXd out(reprs.rows(), static_cast<Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    if (ids[c] < 0 || ids[c] >= reprs.cols())
      throw ContractError("shapelet id " + std::to_string(ids[c]) + " outside [0, " + std::to_string(reprs.cols()) +
                          ")");
    out.col(static_cast<Index>(c)) = reprs.col(ids[c]);
  }
  return out;
}

}  // namespace timecsl
