use serde::{Deserialize, Serialize};

use super::grid::{check_distribution, manhattan, Coord, LANDUSE_CATEGORIES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    NonBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Young,
    MiddleAged,
    Senior,
}

impl AgeGroup {
    /// Banding: under 35 young, 35..=59 middle aged, 60 and over senior.
    pub fn from_age(age: u32) -> Self {
        match age {
            0..=34 => AgeGroup::Young,
            35..=59 => AgeGroup::MiddleAged,
            _ => AgeGroup::Senior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EconomicStatus {
    Poor,
    Low,
    Middle,
    High,
    Wealthy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    EcoEnthusiast,
    CityDweller,
    IndustrialWorker,
    CommunityHelper,
    Explorer,
}

impl Archetype {
    pub const ALL: [Archetype; 5] = [
        Archetype::EcoEnthusiast,
        Archetype::CityDweller,
        Archetype::IndustrialWorker,
        Archetype::CommunityHelper,
        Archetype::Explorer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::EcoEnthusiast => "eco_enthusiast",
            Archetype::CityDweller => "city_dweller",
            Archetype::IndustrialWorker => "industrial_worker",
            Archetype::CommunityHelper => "community_helper",
            Archetype::Explorer => "explorer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub gender: Gender,
    pub age: u32,
    pub age_group: AgeGroup,
    pub economic_status: EconomicStatus,
    pub hobbies: Vec<String>,
    pub archetype: Archetype,
    pub description: String,
}

impl ParticipantProfile {
    /// A neutral profile for hand-built instances.
    pub fn neutral(age: u32) -> Self {
        Self {
            gender: Gender::NonBinary,
            age,
            age_group: AgeGroup::from_age(age),
            economic_status: EconomicStatus::Middle,
            hobbies: Vec::new(),
            archetype: Archetype::Explorer,
            description: String::new(),
        }
    }
}

/// The mobility part of a participant: Σ = (O, D, t_dep, t_arr, v).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub origin: Coord,
    pub destination: Coord,
    pub depart: u32,
    pub arrive: u32,
    pub speed: u32,
}

impl Schedule {
    pub fn new(origin: Coord, destination: Coord, depart: u32, arrive: u32, speed: u32) -> Result<Self> {
        let s = Self {
            origin,
            destination,
            depart,
            arrive,
            speed,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.speed == 0 {
            return Err(Error::InfeasibleSchedule("speed must be positive".into()));
        }
        if self.depart >= self.arrive {
            return Err(Error::InfeasibleSchedule(format!(
                "depart {} must precede arrive {}",
                self.depart, self.arrive
            )));
        }
        let dist = manhattan(self.origin, self.destination);
        let reach = u64::from(self.speed) * u64::from(self.window());
        if u64::from(dist) > reach {
            return Err(Error::InfeasibleSchedule(format!(
                "distance {dist} exceeds reach {reach}"
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> u32 {
        self.arrive - self.depart
    }

    /// Timesteps needed to cover the O-D distance at full speed.
    pub fn min_travel_steps(&self) -> u32 {
        manhattan(self.origin, self.destination).div_ceil(self.speed)
    }

    /// Spare timesteps beyond the fastest O-D trip.
    pub fn residual_steps(&self) -> u32 {
        self.window() - self.min_travel_steps()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParticipantRepr", into = "ParticipantRepr")]
pub struct Participant {
    pub id: String,
    schedule: Schedule,
    pub cost: f64,
    pub preference: [f64; LANDUSE_CATEGORIES],
    pub history_count: u32,
    pub profile: ParticipantProfile,
}

#[derive(Serialize, Deserialize)]
struct ParticipantRepr {
    id: String,
    origin: Coord,
    destination: Coord,
    depart: u32,
    arrive: u32,
    speed: u32,
    cost: f64,
    preference: [f64; LANDUSE_CATEGORIES],
    history_count: u32,
    profile: ParticipantProfile,
}

impl TryFrom<ParticipantRepr> for Participant {
    type Error = Error;

    fn try_from(r: ParticipantRepr) -> Result<Self> {
        let schedule = Schedule::new(r.origin, r.destination, r.depart, r.arrive, r.speed)?;
        Participant::new(r.id, schedule, r.cost, r.preference, r.history_count, r.profile)
    }
}

impl From<Participant> for ParticipantRepr {
    fn from(p: Participant) -> Self {
        let s = p.schedule;
        ParticipantRepr {
            id: p.id,
            origin: s.origin,
            destination: s.destination,
            depart: s.depart,
            arrive: s.arrive,
            speed: s.speed,
            cost: p.cost,
            preference: p.preference,
            history_count: p.history_count,
            profile: p.profile,
        }
    }
}

impl Participant {
    pub fn new(
        id: impl Into<String>,
        schedule: Schedule,
        cost: f64,
        preference: [f64; LANDUSE_CATEGORIES],
        history_count: u32,
        profile: ParticipantProfile,
    ) -> Result<Self> {
        schedule.check()?;
        if !(cost.is_finite() && cost > 0.0) {
            return Err(Error::Invalid(format!("cost must be positive, got {cost}")));
        }
        check_distribution(&preference, "preference")?;
        Ok(Self {
            id: id.into(),
            schedule,
            cost,
            preference,
            history_count,
            profile,
        })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn origin(&self) -> Coord {
        self.schedule.origin
    }

    pub fn destination(&self) -> Coord {
        self.schedule.destination
    }

    pub fn depart(&self) -> u32 {
        self.schedule.depart
    }

    pub fn arrive(&self) -> u32 {
        self.schedule.arrive
    }

    pub fn speed(&self) -> u32 {
        self.schedule.speed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pref() -> [f64; 6] {
        [1.0 / 6.0; 6]
    }

    #[test]
    fn infeasible_participant_is_rejected() {
        let s = Schedule {
            origin: Coord::new(0, 0),
            destination: Coord::new(5, 0),
            depart: 0,
            arrive: 2,
            speed: 2,
        };
        let err = Participant::new("a", s, 1.0, pref(), 0, ParticipantProfile::neutral(30)).unwrap_err();
        assert_eq!(err.code(), "infeasible_schedule");
    }

    #[test]
    fn depart_must_precede_arrive() {
        assert!(Schedule::new(Coord::new(0, 0), Coord::new(0, 0), 3, 3, 1).is_err());
    }

    #[test]
    fn residual_steps() {
        let s = Schedule::new(Coord::new(0, 0), Coord::new(3, 3), 0, 2, 3).unwrap();
        assert_eq!(s.residual_steps(), 0);
        let s = Schedule::new(Coord::new(0, 0), Coord::new(2, 0), 0, 4, 1).unwrap();
        assert_eq!(s.residual_steps(), 2);
    }

    #[test]
    fn json_uses_flat_fields() {
        let s = Schedule::new(Coord::new(0, 0), Coord::new(1, 0), 0, 2, 1).unwrap();
        let p = Participant::new("w1", s, 2.5, pref(), 3, ParticipantProfile::neutral(40)).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["origin"]["x"], 0);
        assert_eq!(v["arrive"], 2);
        assert_eq!(v["profile"]["age_group"], "middle_aged");
        let back: Participant = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn age_banding() {
        assert_eq!(AgeGroup::from_age(34), AgeGroup::Young);
        assert_eq!(AgeGroup::from_age(35), AgeGroup::MiddleAged);
        assert_eq!(AgeGroup::from_age(59), AgeGroup::MiddleAged);
        assert_eq!(AgeGroup::from_age(60), AgeGroup::Senior);
    }
}
