#pragma once

#include "aiaudit/attacks.hpp"
#include "aiaudit/catalogue.hpp"
#include "aiaudit/cli.hpp"
#include "aiaudit/dataset.hpp"
#include "aiaudit/engine.hpp"
#include "aiaudit/explain.hpp"
#include "aiaudit/model.hpp"
#include "aiaudit/perturb.hpp"
#include "aiaudit/report.hpp"
#include "aiaudit/synthetic_signs.hpp"
