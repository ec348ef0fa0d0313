#ifndef IPSG_SAMPLING_HPP
#define IPSG_SAMPLING_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ipsg/random.hpp"

namespace ipsg {

struct Batch {
  std::int64_t id = 0;  // 1-based issue order
  std::vector<std::size_t> indices;
};

/// Stream of minibatches drawn without replacement within each epoch.
///
/// The stream is the concatenation of seeded permutations of {0..m-1}, cut
/// into consecutive chunks of b indices; batch k covers stream positions
/// (k-1)b .. kb-1, so a batch may straddle an epoch boundary. This matches
/// epoch_of(k, b, m).
class BatchStream {
 public:
  BatchStream(std::size_t m, std::size_t b, std::uint64_t seed);

  Batch next();
  std::int64_t issued() const { return issued_; }

 private:
  void reshuffle();

  std::size_t m_;
  std::size_t b_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
  std::int64_t issued_ = 0;
};

}  // namespace ipsg

#endif  // IPSG_SAMPLING_HPP
