#pragma once

#include <dropf/network.hpp>

namespace dropf_cases {

/// 118-bus transmission case: standard topology with parallel circuits
/// merged, 54 dispatchable generators, spread-out loads, a 1000 MW wind farm
/// on the bus 9 spur and a flexible device behind it at bus 10. The monitored
/// corridor 8-9 (limit 950 MW) is the only path for wind deviations, so
/// hedging is possible but costs real generation money.
dropf::NetworkCase build_case118();

}  // namespace dropf_cases
