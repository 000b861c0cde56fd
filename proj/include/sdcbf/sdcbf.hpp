#ifndef SDCBF_SDCBF_HPP
#define SDCBF_SDCBF_HPP

#include "sdcbf/barrier.hpp"
#include "sdcbf/box.hpp"
#include "sdcbf/config.hpp"
#include "sdcbf/csv.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/errors.hpp"
#include "sdcbf/estimation.hpp"
#include "sdcbf/grid.hpp"
#include "sdcbf/interval.hpp"
#include "sdcbf/jet.hpp"
#include "sdcbf/plot.hpp"
#include "sdcbf/qp.hpp"
#include "sdcbf/reachability.hpp"
#include "sdcbf/safety_filter.hpp"
#include "sdcbf/scenario.hpp"
#include "sdcbf/segway.hpp"
#include "sdcbf/sensitivity.hpp"
#include "sdcbf/synthesis.hpp"

#endif  // SDCBF_SDCBF_HPP
