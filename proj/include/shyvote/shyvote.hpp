#pragma once

#include "shyvote/analysis.hpp"
#include "shyvote/error.hpp"
#include "shyvote/iat_protocol.hpp"
#include "shyvote/pipeline.hpp"
#include "shyvote/questionnaire.hpp"
#include "shyvote/ranking.hpp"
#include "shyvote/scoring.hpp"
#include "shyvote/simulator.hpp"
