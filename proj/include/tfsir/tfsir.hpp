#pragma once

#include <tfsir/data.hpp>
#include <tfsir/draws_io.hpp>
#include <tfsir/error.hpp>
#include <tfsir/likelihood.hpp>
#include <tfsir/math.hpp>
#include <tfsir/posterior.hpp>
#include <tfsir/priors.hpp>
#include <tfsir/random.hpp>
#include <tfsir/sampler.hpp>
#include <tfsir/simulator.hpp>
#include <tfsir/study.hpp>
