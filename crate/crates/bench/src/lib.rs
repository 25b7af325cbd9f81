//! Shared inputs for the benchmarks.

use turnprint_core::config::RunConfig;
use turnprint_core::eval::{simulate_corpus, CorpusSpec};
use turnprint_core::features::FeatureVector;
use turnprint_core::simgen::{
    generate_trip, population, random_route, DriverProfile, ProfileRanges, RouteMix, TripOptions,
};
use turnprint_core::trace::RawTrace;

/// A 12-turn trip of the default driver at 100 Hz.
pub fn sample_trip(seed: u64) -> RawTrace {
    let route = random_route(&RouteMix { turns: 12, ..RouteMix::default() }, seed);
    generate_trip(&DriverProfile::default(), &route, 0.01, seed).expect("default trip is feasible").0
}

/// Labeled, interpolated feature vectors of `drivers` synthetic drivers.
pub fn labeled_vectors(drivers: usize, trips: usize, seed: u64) -> Vec<FeatureVector> {
    let config = RunConfig::default();
    let spec = CorpusSpec {
        drivers: population(drivers, &ProfileRanges::default(), seed),
        trips_per_driver: trips,
        route: RouteMix { turns: 10, ..RouteMix::default() },
        trip: TripOptions::new(0.01, 0),
        shared_routes: false,
    };
    simulate_corpus(&spec, &config, seed)
        .and_then(|corpus| corpus.vectors(&config, true))
        .expect("benchmark corpus is feasible")
}
