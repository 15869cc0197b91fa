// Copyright 2026 The Psycal Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "psycal/codec.h"
#include "psycal/pam.h"

namespace psycal {

int BitAllocation::bits_used() const {
  return std::accumulate(bits_per_band.begin(), bits_per_band.end(), 0);
}

BitAllocation GreedyAllocateBands(std::span<const double> band_nmr_db,
                                  int budget) {
  if (budget < 0) throw std::invalid_argument("bit budget must be >= 0");
  BitAllocation out;
  out.budget = budget;
  out.initial_nmr_db.assign(band_nmr_db.begin(), band_nmr_db.end());
  out.bits_per_band.assign(band_nmr_db.size(), 0);
  if (band_nmr_db.empty()) return out;

  std::vector<double> current = out.initial_nmr_db;
  auto worst = [&] {
    return static_cast<std::size_t>(
        std::max_element(current.begin(), current.end()) - current.begin());
  };
  out.nmr_trace.push_back(current[worst()]);
  for (int used = 0; used < budget; ++used) {
    const std::size_t band = worst();
    if (current[band] <= 0.0) break;
    ++out.bits_per_band[band];
    current[band] -= kDbPerBit;
    out.nmr_trace.push_back(current[worst()]);
  }
  return out;
}

std::vector<double> CriticalBandNmrDb(const PowerSpectrumDb& psd,
                                      const GlobalMask& mask) {
  if (psd.values.size() != mask.m.size()) {
    throw std::invalid_argument("PSD and mask lengths differ");
  }
  std::vector<double> out;
  for (const BandRange& band : CriticalBands(psd.bin_hz, psd.values.size())) {
    double signal = 0.0;
    double masked = 0.0;
    for (std::size_t f = band.first; f <= band.last; ++f) {
      signal += std::pow(10.0, 0.1 * psd.values[f]);
      masked += std::pow(10.0, 0.1 * mask.m[f]);
    }
    out.push_back(10.0 * std::log10(signal / masked));
  }
  return out;
}

BitAllocation GreedyNmrAllocate(const PowerSpectrumDb& psd,
                                const GlobalMask& mask, int budget) {
  return GreedyAllocateBands(CriticalBandNmrDb(psd, mask), budget);
}

}  // namespace psycal
