#ifndef IPSG_INSTANCE_IO_HPP
#define IPSG_INSTANCE_IO_HPP

#include <iosfwd>
#include <memory>
#include <string>

#include "ipsg/problems.hpp"

namespace ipsg {

/// Problem data without the regularizer, as stored on disk.
struct InstanceData {
  std::string kind;  // phase_retrieval, smooth_synthetic, sparse_blr, quadratic
  std::shared_ptr<const MeasurementData> measurements;
  std::shared_ptr<const BlrData> blr;
  Vector diag;
  Vector center;
  std::size_t samples = 1;
};

/// Plain-text format: a magic line, the kind, then named sections
/// "<name> <count>" each followed by count values, one per line, printed
/// with 17 significant digits so a reload is bit-exact.
void save_instance(const InstanceData& inst, std::ostream& out);
InstanceData load_instance(std::istream& in);

void save_instance_file(const InstanceData& inst, const std::string& path);
InstanceData load_instance_file(const std::string& path);

}  // namespace ipsg

#endif  // IPSG_INSTANCE_IO_HPP
