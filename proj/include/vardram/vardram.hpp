#pragma once

#include "address.hpp"
#include "bank.hpp"
#include "config.hpp"
#include "energy.hpp"
#include "refresh.hpp"
#include "remap.hpp"
#include "report.hpp"
#include "simulator.hpp"
#include "trace.hpp"
#include "trie.hpp"
#include "types.hpp"
#include "variation.hpp"
