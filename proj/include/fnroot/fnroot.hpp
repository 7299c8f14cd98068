#pragma once

#include "fnroot/alerts.hpp"
#include "fnroot/capture.hpp"
#include "fnroot/correlate.hpp"
#include "fnroot/flows.hpp"
#include "fnroot/net.hpp"
#include "fnroot/rootcause.hpp"
#include "fnroot/serialize.hpp"
#include "fnroot/text.hpp"
#include "fnroot/verdict.hpp"
