#pragma once

#include "skm/adversarial.hpp"
#include "skm/assignment.hpp"
#include "skm/baseline.hpp"
#include "skm/centroids.hpp"
#include "skm/complexity_model.hpp"
#include "skm/cumulative_index.hpp"
#include "skm/dataset_io.hpp"
#include "skm/error.hpp"
#include "skm/experiment.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"
#include "skm/sublinear_kmeans.hpp"
#include "skm/synthetic.hpp"
