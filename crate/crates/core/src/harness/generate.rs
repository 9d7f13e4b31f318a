//! Seeded synthetic instances: grid attributes, itineraries and profiles.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rand_distr::Dirichlet;

use super::InstanceConfig;
use crate::domain::{
    manhattan, AgeGroup, Archetype, CellAttributes, Coord, EconomicStatus, Gender, GridMap, Instance, LandUse,
    Participant, ParticipantProfile, Schedule, TaskSpec, LANDUSE_CATEGORIES,
};
use crate::error::{Error, Result};

/// Crime counts below this are treated as missing data.
pub const CRIME_EXCLUSION_THRESHOLD: u32 = 10;

const HOBBIES: [&str; 12] = [
    "hiking",
    "gardening",
    "cycling",
    "shopping",
    "dining out",
    "photography",
    "volunteering",
    "reading",
    "fishing",
    "gaming",
    "running",
    "museums",
];

/// Land-use preference of an archetype before per-person noise: 0.5 on the
/// dominant category and 0.1 elsewhere; explorers are uniform.
pub fn archetype_base(a: Archetype) -> [f64; LANDUSE_CATEGORIES] {
    let dominant = match a {
        Archetype::EcoEnthusiast => LandUse::Vegetation,
        Archetype::CityDweller => LandUse::Residential,
        Archetype::IndustrialWorker => LandUse::Industrial,
        Archetype::CommunityHelper => LandUse::Medical,
        Archetype::Explorer => return [1.0 / LANDUSE_CATEGORIES as f64; LANDUSE_CATEGORIES],
    };
    let mut v = [0.1; LANDUSE_CATEGORIES];
    v[dominant.index()] = 0.5;
    v
}

fn archetype_description(a: Archetype) -> &'static str {
    match a {
        Archetype::EcoEnthusiast => "Prefers green spaces and quiet neighborhoods.",
        Archetype::CityDweller => "Favors dense residential and commercial areas.",
        Archetype::IndustrialWorker => "Frequently operates near industrial zones.",
        Archetype::CommunityHelper => "Prefers regions near hospitals, schools, and community facilities.",
        Archetype::Explorer => "Has balanced preferences across different regions.",
    }
}

/// Compatibility of an archetype with an age group and economic status.
fn compatibility(a: Archetype, age: AgeGroup, econ: EconomicStatus) -> f64 {
    let (by_age, by_econ): ([f64; 3], [f64; 5]) = match a {
        Archetype::EcoEnthusiast => ([1.2, 1.0, 1.2], [0.8, 0.9, 1.0, 1.2, 1.2]),
        Archetype::CityDweller => ([1.5, 1.0, 0.6], [0.7, 0.9, 1.1, 1.3, 1.4]),
        Archetype::IndustrialWorker => ([1.0, 1.4, 0.5], [1.4, 1.4, 1.0, 0.6, 0.4]),
        Archetype::CommunityHelper => ([0.8, 1.1, 1.5], [1.0, 1.1, 1.1, 1.0, 0.9]),
        Archetype::Explorer => ([1.3, 1.0, 0.8], [1.0; 5]),
    };
    let ai = match age {
        AgeGroup::Young => 0,
        AgeGroup::MiddleAged => 1,
        AgeGroup::Senior => 2,
    };
    by_age[ai] * by_econ[econ as usize]
}

/// Demographics from fixed distributions, an archetype drawn in proportion
/// to its compatibility with them, and a preference vector of 0.9 times the
/// archetype base plus 0.1 times a flat Dirichlet draw.
pub fn sample_profile<R: Rng + ?Sized>(rng: &mut R) -> (ParticipantProfile, [f64; LANDUSE_CATEGORIES]) {
    let gender = [Gender::Male, Gender::Female, Gender::NonBinary][WeightedIndex::new([0.48, 0.48, 0.04])
        .expect("static weights")
        .sample(rng)];
    let age = rng.random_range(18..=70);
    let econ = [
        EconomicStatus::Poor,
        EconomicStatus::Low,
        EconomicStatus::Middle,
        EconomicStatus::High,
        EconomicStatus::Wealthy,
    ][WeightedIndex::new([0.1, 0.2, 0.4, 0.2, 0.1])
        .expect("static weights")
        .sample(rng)];
    let age_group = AgeGroup::from_age(age);
    let weights = Archetype::ALL.map(|a| compatibility(a, age_group, econ));
    let archetype = Archetype::ALL[WeightedIndex::new(weights).expect("positive weights").sample(rng)];
    let n_hobbies = rng.random_range(1..=3);
    let mut hobbies: Vec<String> = sample(rng, HOBBIES.len(), n_hobbies)
        .into_iter()
        .map(|i| HOBBIES[i].to_string())
        .collect();
    hobbies.sort();

    let noise: [f64; LANDUSE_CATEGORIES] = Dirichlet::new([1.0; LANDUSE_CATEGORIES])
        .expect("valid alpha")
        .sample(rng);
    let base = archetype_base(archetype);
    let mut pref = [0.0; LANDUSE_CATEGORIES];
    for k in 0..LANDUSE_CATEGORIES {
        pref[k] = 0.9 * base[k] + 0.1 * noise[k];
    }
    let total: f64 = pref.iter().sum();
    pref.iter_mut().for_each(|x| *x /= total);

    let profile = ParticipantProfile {
        gender,
        age,
        age_group,
        economic_status: econ,
        hobbies,
        archetype,
        description: archetype_description(archetype).to_string(),
    };
    (profile, pref)
}

/// [`sample_profile`] from its own seed.
pub fn sample_profile_seeded(seed: u64) -> (ParticipantProfile, [f64; LANDUSE_CATEGORIES]) {
    sample_profile(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn random_grid<R: Rng + ?Sized>(config: &InstanceConfig, rng: &mut R) -> Result<GridMap> {
    let landuse = Dirichlet::new([0.5; LANDUSE_CATEGORIES]).expect("valid alpha");
    let cells = (0..config.width * config.height)
        .map(|_| {
            let mut mix: [f64; LANDUSE_CATEGORIES] = landuse.sample(rng);
            let total: f64 = mix.iter().sum();
            mix.iter_mut().for_each(|x| *x /= total);
            let crime_count = if config.crime && rng.random_bool(0.5) {
                let c = rng.random_range(0..=60);
                if c < CRIME_EXCLUSION_THRESHOLD {
                    0
                } else {
                    c
                }
            } else {
                0
            };
            CellAttributes {
                landuse: mix,
                crime_count,
            }
        })
        .collect();
    GridMap::new(config.width, config.height, cells)
}

/// A feasible itinerary: random window inside the horizon and a destination
/// within reach of the origin.
pub(crate) fn random_schedule<R: Rng + ?Sized>(config: &InstanceConfig, rng: &mut R) -> Result<Schedule> {
    let t = config.horizon_steps();
    let speed = rng.random_range(config.speed_range.0..=config.speed_range.1);
    let depart = rng.random_range(0..t);
    let arrive = rng.random_range(depart + 1..=t);
    let cell = |rng: &mut R| Coord::new(rng.random_range(0..config.width), rng.random_range(0..config.height));
    let origin = cell(rng);
    let reach = speed * (arrive - depart);
    let mut destination = origin;
    for _ in 0..64 {
        let d = cell(rng);
        if manhattan(origin, d) <= reach {
            destination = d;
            break;
        }
    }
    Schedule::new(origin, destination, depart, arrive, speed)
}

pub(crate) fn participant_id(i: usize) -> String {
    format!("w{:04}", i + 1)
}

/// Pure function of (config, seed).
pub fn generate_instance(config: &InstanceConfig, seed: u64) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(config, &mut rng)?;
    let spec = TaskSpec::new(grid, config.horizon_steps(), config.interval_minutes, config.budget)?;
    let (clo, chi) = config.cost_range;
    let mut participants = Vec::with_capacity(config.n_participants);
    for i in 0..config.n_participants {
        let schedule = random_schedule(config, &mut rng)?;
        let cost = if chi > clo { rng.random_range(clo..=chi) } else { clo };
        let cost = (cost * 100.0).round() / 100.0;
        let (profile, preference) = sample_profile(&mut rng);
        participants.push(Participant::new(
            participant_id(i),
            schedule,
            cost,
            preference,
            0,
            profile,
        )?);
    }
    if participants.is_empty() {
        return Err(Error::DegenerateConfig("no participants requested".into()));
    }
    Instance::new(spec, participants)
}
