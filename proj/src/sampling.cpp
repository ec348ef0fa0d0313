#include "ipsg/sampling.hpp"

#include <numeric>
#include <stdexcept>

namespace ipsg {

BatchStream::BatchStream(std::size_t m, std::size_t b, std::uint64_t seed)
    : m_(m), b_(b), rng_(seed), perm_(m) {
  if (m < 1 || b < 1)
    throw std::invalid_argument("BatchStream: m and b must be >= 1");
  reshuffle();
}

void BatchStream::reshuffle() {
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  shuffle(perm_, rng_);
  pos_ = 0;
}

Batch BatchStream::next() {
  Batch batch;
  batch.id = ++issued_;
  batch.indices.reserve(b_);
  while (batch.indices.size() < b_) {
    if (pos_ == m_) reshuffle();
    batch.indices.push_back(perm_[pos_++]);
  }
  return batch;
}

}  // namespace ipsg
