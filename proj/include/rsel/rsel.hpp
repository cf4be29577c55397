#pragma once

#include "rsel/bits.hpp"
#include "rsel/dyn_string.hpp"
#include "rsel/error.hpp"
#include "rsel/matrix_structure.hpp"
#include "rsel/oracle.hpp"
#include "rsel/order_index.hpp"
#include "rsel/packed_fields.hpp"
#include "rsel/partial_sums.hpp"
#include "rsel/point_set.hpp"
#include "rsel/ranking_tree.hpp"
#include "rsel/stats.hpp"
#include "rsel/wavelet_array.hpp"
#include "rsel/workload.hpp"
