#ifndef SUBIQC_SUBIQC_HPP
#define SUBIQC_SUBIQC_HPP

#include <subiqc/core.hpp>
#include <subiqc/subspace_gossip.hpp>
#include <subiqc/objectives.hpp>
#include <subiqc/algorithms.hpp>
#include <subiqc/simulate.hpp>
#include <subiqc/iqc.hpp>
#include <subiqc/sdp.hpp>
#include <subiqc/analysis.hpp>
#include <subiqc/io.hpp>
#include <subiqc/scenario.hpp>
#include <subiqc/cli.hpp>

#endif  // SUBIQC_SUBIQC_HPP
