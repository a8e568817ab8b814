#pragma once

#include "pdttagger/advisor.hpp"
#include "pdttagger/counters.hpp"
#include "pdttagger/error.hpp"
#include "pdttagger/pragma_scan.hpp"
#include "pdttagger/profile.hpp"
#include "pdttagger/report.hpp"
#include "pdttagger/rewriter.hpp"
#include "pdttagger/runtime.hpp"
#include "pdttagger/tuner.hpp"
