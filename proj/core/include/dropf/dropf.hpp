#pragma once

#include "dropf/assembler.hpp"
#include "dropf/dro.hpp"
#include "dropf/evaluation.hpp"
#include "dropf/horizon.hpp"
#include "dropf/io.hpp"
#include "dropf/mpc.hpp"
#include "dropf/network.hpp"
#include "dropf/policy.hpp"
#include "dropf/qp.hpp"
#include "dropf/types.hpp"
#include "dropf/version.hpp"
