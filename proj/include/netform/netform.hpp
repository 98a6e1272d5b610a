#ifndef NETFORM_NETFORM_HPP
#define NETFORM_NETFORM_HPP

#include "bias.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "formation.hpp"
#include "game.hpp"
#include "graph_algorithms.hpp"
#include "jml.hpp"
#include "montecarlo.hpp"
#include "network.hpp"
#include "npl.hpp"
#include "transitivity.hpp"

#endif
