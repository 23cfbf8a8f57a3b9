#pragma once

#include "banditspec/acceptance_csv.hpp"
#include "banditspec/analysis.hpp"
#include "banditspec/config.hpp"
#include "banditspec/distributions.hpp"
#include "banditspec/engine.hpp"
#include "banditspec/environments.hpp"
#include "banditspec/errors.hpp"
#include "banditspec/experiment.hpp"
#include "banditspec/policies.hpp"
#include "banditspec/rng.hpp"
