//! Thermal residue left on a keyboard by a typing session, as seen by a
//! thermal camera some time later.
//!
//! Every contact heats its keycap by the conduction step in [`crate::physics`]
//! and each contribution decays independently; a key's excess is the sum of its
//! contributions, capped at skin minus ambient.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::{KeySet, KeyboardLayout};
use crate::physics::{self, EnvironmentSpec, KeycapSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypingStyle {
    /// Hunt-and-peck: only pressed keys are touched.
    #[serde(rename = "HP", alias = "hp")]
    HuntAndPeck,
    /// Touch typing: fingers rest on the home row.
    #[serde(rename = "TT", alias = "tt")]
    TouchTyping,
}

impl std::str::FromStr for TypingStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hp" | "hunt-and-peck" => Ok(Self::HuntAndPeck),
            "tt" | "touch" | "touch-typing" => Ok(Self::TouchTyping),
            other => Err(Error::invalid(format!("unknown typing style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    /// A keystroke belonging to the typed text.
    Press,
    /// A resting or incidental touch.
    Rest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub key: char,
    /// Seconds from the start of the session.
    pub press_time: f64,
    pub contact_duration: f64,
    /// Fraction of a full fingertip's contact area, in [0, 1].
    pub contact_area_scale: f64,
    pub kind: ContactKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingSession {
    events: Vec<ContactEvent>,
    style: TypingStyle,
    /// Ambient temperature during the session, K.
    ambient: f64,
}

impl TypingSession {
    pub fn new(mut events: Vec<ContactEvent>, style: TypingStyle, ambient: f64) -> Result<Self> {
        for e in &events {
            if !(e.contact_duration > 0.0) {
                return Err(Error::invalid(format!(
                    "contact on {:?} has non-positive duration",
                    e.key
                )));
            }
            // A zero scale is allowed: nail-tip typing leaves no residue.
            if !(0.0..=1.0).contains(&e.contact_area_scale) {
                return Err(Error::invalid(format!(
                    "contact area scale {} outside [0, 1]",
                    e.contact_area_scale
                )));
            }
            if !e.press_time.is_finite() {
                return Err(Error::invalid("press time must be finite"));
            }
        }
        events.sort_by(|a, b| a.press_time.total_cmp(&b.press_time));
        Ok(Self {
            events,
            style,
            ambient,
        })
    }

    pub fn events(&self) -> &[ContactEvent] {
        &self.events
    }

    pub fn style(&self) -> TypingStyle {
        self.style
    }

    pub fn ambient(&self) -> f64 {
        self.ambient
    }

    /// Keys actually typed, ignoring resting contacts.
    pub fn pressed_keys(&self) -> KeySet {
        self.events
            .iter()
            .filter(|e| e.kind == ContactKind::Press)
            .map(|e| e.key)
            .collect()
    }

    /// Every key that received any contact.
    pub fn touched_keys(&self) -> KeySet {
        self.events.iter().map(|e| e.key).collect()
    }

    /// Time of the last keystroke; capture clocks start here.
    pub fn entry_end(&self) -> f64 {
        self.events
            .iter()
            .filter(|e| e.kind == ContactKind::Press)
            .map(|e| e.press_time)
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
            .unwrap_or(0.0)
    }
}

/// How a simulated typist moves over the keyboard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TypingCadence {
    pub start_time: f64,
    /// Seconds between consecutive keystrokes.
    pub interval: f64,
    pub press_duration: f64,
    /// Length of a touch typist's resting contact.
    pub rest_duration: f64,
    /// Home-row residue relative to a normal press.
    pub home_row_intensity: f64,
    /// Near-home residue relative to a normal press.
    pub near_home_intensity: f64,
    pub near_home_contacts: bool,
    /// Typing with nail tips; no skin contact.
    pub acrylic_nails: bool,
}

impl Default for TypingCadence {
    fn default() -> Self {
        Self {
            start_time: 0.0,
            interval: 0.3,
            press_duration: 0.28,
            rest_duration: 2.0,
            home_row_intensity: 0.8,
            near_home_intensity: 0.3,
            near_home_contacts: false,
            acrylic_nails: false,
        }
    }
}

/// Lays out the keystrokes of `password` with the given cadence.
///
/// Touch typists additionally leave resting contacts on the home row (and
/// optionally the near-home keys) at the end of entry. A resting contact lasts
/// `rest_duration` with its area reduced so that its residue equals the
/// configured fraction of a normal press.
pub fn simulate_session(
    password: &str,
    style: TypingStyle,
    layout: &KeyboardLayout,
    cadence: &TypingCadence,
    env: &EnvironmentSpec,
) -> Result<TypingSession> {
    if let Some(c) = password.chars().find(|&c| !layout.contains(c)) {
        return Err(Error::UnknownKey(c));
    }
    if !(cadence.press_duration > 0.0 && cadence.interval >= 0.0) {
        return Err(Error::invalid("cadence needs a positive press duration"));
    }
    let press_scale = if cadence.acrylic_nails { 0.0 } else { 1.0 };
    let mut events: Vec<ContactEvent> = password
        .chars()
        .enumerate()
        .map(|(i, key)| ContactEvent {
            key,
            press_time: cadence.start_time + i as f64 * cadence.interval,
            contact_duration: cadence.press_duration,
            contact_area_scale: press_scale,
            kind: ContactKind::Press,
        })
        .collect();

    if style == TypingStyle::TouchTyping && !events.is_empty() && !cadence.acrylic_nails {
        if !(cadence.rest_duration > 0.0) {
            return Err(Error::invalid("rest duration must be positive"));
        }
        let end = events.last().map(|e| e.press_time).unwrap_or(cadence.start_time);
        let rest = |key: char, intensity: f64| ContactEvent {
            key,
            press_time: end,
            contact_duration: cadence.rest_duration,
            contact_area_scale: (intensity * cadence.press_duration / cadence.rest_duration)
                .clamp(0.0, 1.0),
            kind: ContactKind::Rest,
        };
        events.extend(layout.home_row().iter().map(|&k| rest(k, cadence.home_row_intensity)));
        if cadence.near_home_contacts {
            events.extend(
                layout
                    .near_home()
                    .iter()
                    .map(|&k| rest(k, cadence.near_home_intensity)),
            );
        }
    }
    TypingSession::new(events, style, env.ambient_temp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyTemperature {
    pub row: usize,
    pub col: usize,
    pub label: char,
    pub kelvin: f64,
}

/// Temperature of every key on the layout at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub timestamp: f64,
    pub ambient: f64,
    pub keys: Vec<KeyTemperature>,
}

impl ThermalState {
    pub fn temperature(&self, key: char) -> Option<f64> {
        self.keys.iter().find(|k| k.label == key).map(|k| k.kelvin)
    }

    pub fn excess(&self, key: char) -> Option<f64> {
        self.temperature(key).map(|t| t - self.ambient)
    }

    /// Writes the `row,col,label,kelvin` grid.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for key in &self.keys {
            w.serialize(key).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a grid written by [`ThermalState::write_csv`]. The grid does not
    /// carry the timestamp or ambient, so they are supplied.
    pub fn read_csv<R: Read>(reader: R, timestamp: f64, ambient: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let keys = r
            .deserialize()
            .collect::<std::result::Result<Vec<KeyTemperature>, _>>()
            .map_err(csv_error)?;
        Ok(Self {
            timestamp,
            ambient,
            keys,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

/// Heat and temperature rise of a single contact event.
pub fn contact_rise(event: &ContactEvent, keycap: &KeycapSpec, env: &EnvironmentSpec) -> Result<f64> {
    let keycap = KeycapSpec {
        contact_area: keycap.contact_area * event.contact_area_scale,
        ..*keycap
    };
    let env = EnvironmentSpec {
        press_duration: event.contact_duration,
        ..*env
    };
    let heat = physics::conduction_heat(&keycap, &env)?.max(0.0);
    physics::temperature_rise(heat, &keycap)
}

/// Uncapped per-key excess over ambient at session time `t`.
///
/// Contacts that have not happened yet at `t` contribute nothing.
pub fn excess_at(
    session: &TypingSession,
    t: f64,
    keycap: &KeycapSpec,
    env: &EnvironmentSpec,
) -> Result<BTreeMap<char, f64>> {
    let env = EnvironmentSpec {
        ambient_temp: session.ambient,
        ..*env
    };
    let mut excess = BTreeMap::new();
    for event in &session.events {
        if event.press_time > t {
            continue;
        }
        let rise = contact_rise(event, keycap, &env)?;
        let left = physics::decay(rise, env.cooling_constant, t - event.press_time);
        *excess.entry(event.key).or_insert(0.0) += left;
    }
    Ok(excess)
}

/// Keyboard temperatures at session time `t`.
pub fn thermal_state_at(
    session: &TypingSession,
    layout: &KeyboardLayout,
    t: f64,
    keycap: &KeycapSpec,
    env: &EnvironmentSpec,
) -> Result<ThermalState> {
    let excess = excess_at(session, t, keycap, env)?;
    let cap = (env.skin_temp - session.ambient).max(0.0);
    let keys = layout
        .keys()
        .iter()
        .map(|k| KeyTemperature {
            row: k.row,
            col: k.col,
            label: k.label,
            kelvin: session.ambient + excess.get(&k.label).copied().unwrap_or(0.0).min(cap),
        })
        .collect();
    Ok(ThermalState {
        timestamp: t,
        ambient: session.ambient,
        keys,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub name: String,
    /// Smallest resolvable temperature difference, K.
    pub sensitivity: f64,
    /// Delay between trigger and exposure, s.
    #[serde(default)]
    pub capture_latency: f64,
}

impl CameraModel {
    pub const PRESETS: [(&'static str, f64); 4] = [
        ("flir-one", 0.15),
        ("sc620", 0.04),
        ("a6700sc", 0.018),
        ("x8500sc", 0.02),
    ];

    pub fn new(name: impl Into<String>, sensitivity: f64) -> Result<Self> {
        if !(sensitivity > 0.0) {
            return Err(Error::domain("camera sensitivity must be positive"));
        }
        Ok(Self {
            name: name.into(),
            sensitivity,
            capture_latency: 0.0,
        })
    }

    pub fn preset(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        Self::PRESETS
            .iter()
            .find(|(n, _)| *n == lower)
            .map(|&(n, s)| Self {
                name: n.to_string(),
                sensitivity: s,
                capture_latency: 0.0,
            })
    }

    pub fn sc620() -> Self {
        Self::preset("sc620").expect("preset exists")
    }

    /// Seconds a single default press stays visible to this camera.
    pub fn observability_window(&self, delta_t0: f64, kappa: f64) -> Result<f64> {
        physics::time_to_threshold(delta_t0, self.sensitivity, kappa)
    }
}

/// Keys whose excess reaches the camera's sensitivity.
pub fn extract_hot_keys(state: &ThermalState, camera: &CameraModel) -> KeySet {
    state
        .keys
        .iter()
        .filter(|k| k.kelvin - state.ambient >= camera.sensitivity)
        .map(|k| k.label)
        .collect()
}

/// Keys missed plus keys wrongly reported: `|(K ∪ P) \ (K ∩ P)|`.
pub fn keyset_distance(truth: &KeySet, detected: &KeySet) -> usize {
    truth.symmetric_difference(detected).count()
}

/// Key-set distance between the typed keys and what the camera sees at each
/// sample time. Times are seconds after the last keystroke.
pub fn recovery_curve(
    session: &TypingSession,
    layout: &KeyboardLayout,
    camera: &CameraModel,
    keycap: &KeycapSpec,
    env: &EnvironmentSpec,
    sample_times: &[f64],
) -> Result<Vec<(f64, usize)>> {
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("sample times must be sorted ascending"));
    }
    let truth = session.pressed_keys();
    let end = session.entry_end();
    sample_times
        .iter()
        .map(|&t| {
            let state = thermal_state_at(session, layout, end + t + camera.capture_latency, keycap, env)?;
            Ok((t, keyset_distance(&truth, &extract_hot_keys(&state, camera))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp(password: &str) -> TypingSession {
        simulate_session(
            password,
            TypingStyle::HuntAndPeck,
            &KeyboardLayout::default(),
            &TypingCadence::default(),
            &EnvironmentSpec::default(),
        )
        .unwrap()
    }

    fn state(session: &TypingSession, t: f64) -> ThermalState {
        thermal_state_at(
            session,
            &KeyboardLayout::default(),
            t,
            &KeycapSpec::default(),
            &EnvironmentSpec::default(),
        )
        .unwrap()
    }

    fn single_rise() -> f64 {
        let keycap = KeycapSpec::default();
        physics::temperature_rise(
            physics::conduction_heat(&keycap, &EnvironmentSpec::default()).unwrap(),
            &keycap,
        )
        .unwrap()
    }

    #[test]
    fn hunt_and_peck_touches_only_password_keys() {
        let session = hp("iloveyou");
        assert_eq!(session.touched_keys(), "iloveyu".chars().collect());
        assert_eq!(session.events().len(), 8);
        assert!(hp("").events().is_empty());
    }

    #[test]
    fn touch_typing_adds_home_row() {
        let layout = KeyboardLayout::default();
        let session = simulate_session(
            "iloveyou",
            TypingStyle::TouchTyping,
            &layout,
            &TypingCadence::default(),
            &EnvironmentSpec::default(),
        )
        .unwrap();
        let touched = session.touched_keys();
        assert!(touched.is_superset(&"iloveyu".chars().collect()));
        assert!(touched.is_superset(layout.home_row()));
        assert_eq!(session.pressed_keys(), "iloveyu".chars().collect());

        let st = thermal_state_at(&session, &layout, session.entry_end(), &KeycapSpec::default(), &EnvironmentSpec::default()).unwrap();
        let rise = single_rise();
        // 'l' is both typed and rested on.
        assert!((st.excess('a').unwrap() - 0.8 * rise).abs() < 1e-12);
        let hot = extract_hot_keys(&st, &CameraModel::sc620());
        assert!(hot.is_superset(layout.home_row()));
    }

    #[test]
    fn unknown_character_is_named() {
        let err = simulate_session(
            "pass word",
            TypingStyle::HuntAndPeck,
            &KeyboardLayout::default(),
            &TypingCadence::default(),
            &EnvironmentSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownKey(' ')));
    }

    #[test]
    fn single_press_excess_at_press_time() {
        let session = hp("x");
        let st = state(&session, 0.0);
        assert!((st.excess('x').unwrap() - 0.3092).abs() < 5e-4);
        assert_eq!(st.excess('y').unwrap(), 0.0);
        assert_eq!(st.keys.len(), 46);
    }

    #[test]
    fn double_press_doubles_residue() {
        let cadence = TypingCadence {
            interval: 0.0,
            ..Default::default()
        };
        let session = simulate_session(
            "xx",
            TypingStyle::HuntAndPeck,
            &KeyboardLayout::default(),
            &cadence,
            &EnvironmentSpec::default(),
        )
        .unwrap();
        let st = state(&session, 0.0);
        assert!((st.excess('x').unwrap() - 2.0 * single_rise()).abs() < 1e-12);
    }

    #[test]
    fn future_contacts_do_not_count() {
        let session = hp("ab");
        let st = state(&session, 0.1);
        assert!(st.excess('a').unwrap() > 0.0);
        assert_eq!(st.excess('b').unwrap(), 0.0);
    }

    #[test]
    fn residue_is_capped_at_skin() {
        let cadence = TypingCadence {
            interval: 0.0,
            press_duration: 100.0,
            ..Default::default()
        };
        let env = EnvironmentSpec::default();
        let session = simulate_session("q", TypingStyle::HuntAndPeck, &KeyboardLayout::default(), &cadence, &env).unwrap();
        let st = state(&session, 0.0);
        assert!((st.temperature('q').unwrap() - env.skin_temp).abs() < 1e-9);
    }

    #[test]
    fn hot_keys_after_entry() {
        let session = hp("passw0rd");
        let end = session.entry_end();
        let expected: KeySet = "pasw0rd".chars().collect();
        assert_eq!(extract_hot_keys(&state(&session, end), &CameraModel::sc620()), expected);
        let blind = CameraModel::new("blind", 1.0).unwrap();
        assert!(extract_hot_keys(&state(&session, end), &blind).is_empty());
        assert_eq!(extract_hot_keys(&state(&session, end + 30.0), &CameraModel::sc620()), expected);
        assert!(extract_hot_keys(&state(&session, end + 120.0), &CameraModel::sc620()).is_empty());
    }

    #[test]
    fn acrylic_nails_leave_nothing() {
        let cadence = TypingCadence {
            acrylic_nails: true,
            ..Default::default()
        };
        let session = simulate_session(
            "football",
            TypingStyle::TouchTyping,
            &KeyboardLayout::default(),
            &cadence,
            &EnvironmentSpec::default(),
        )
        .unwrap();
        let st = state(&session, session.entry_end());
        assert!(extract_hot_keys(&st, &CameraModel::preset("a6700sc").unwrap()).is_empty());
    }

    #[test]
    fn distance_examples() {
        let set = |s: &str| s.chars().collect::<KeySet>();
        assert_eq!(keyset_distance(&set("pasw0rd"), &set("pasw0rd")), 0);
        assert_eq!(keyset_distance(&set("abc"), &set("abd")), 2);
        assert_eq!(keyset_distance(&set("a"), &set("")), 1);
    }

    #[test]
    fn recovery_curve_examples() {
        let layout = KeyboardLayout::default();
        let keycap = KeycapSpec::default();
        let env = EnvironmentSpec::default();
        let times: Vec<f64> = (0..=60).map(f64::from).collect();
        let session = hp("12341234");
        let window = physics::time_to_threshold(single_rise(), 0.04, env.cooling_constant).unwrap();
        let curve = recovery_curve(&session, &layout, &CameraModel::sc620(), &keycap, &env, &times).unwrap();
        for (t, d) in &curve {
            if *t < window {
                assert_eq!(*d, 0, "t = {t}");
            }
        }
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));

        let blind = CameraModel::new("blind", 5.0).unwrap();
        let curve = recovery_curve(&session, &layout, &blind, &keycap, &env, &times).unwrap();
        assert!(curve.iter().all(|&(_, d)| d == 4));

        let curve = recovery_curve(&hp(""), &layout, &CameraModel::sc620(), &keycap, &env, &times).unwrap();
        assert!(curve.iter().all(|&(_, d)| d == 0));

        assert!(recovery_curve(&session, &layout, &blind, &keycap, &env, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn csv_grid_round_trip() {
        let st = state(&hp("passw0rd"), 3.0);
        let mut buf = Vec::new();
        st.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("row,col,label,kelvin\n"));
        let back = ThermalState::read_csv(buf.as_slice(), st.timestamp, st.ambient).unwrap();
        assert_eq!(back, st);
    }

    fn key_strategy() -> impl Strategy<Value = char> {
        proptest::sample::select(crate::keys::alphabet())
    }

    proptest! {
        #[test]
        fn hot_set_shrinks_over_time(
            password in proptest::collection::vec(key_strategy(), 0..12),
            t1 in 0.0f64..90.0, dt in 0.0f64..90.0
        ) {
            let password: String = password.into_iter().collect();
            let session = hp(&password);
            let end = session.entry_end();
            let cam = CameraModel::sc620();
            let early = extract_hot_keys(&state(&session, end + t1), &cam);
            let late = extract_hot_keys(&state(&session, end + t1 + dt), &cam);
            prop_assert!(late.is_subset(&early));
            prop_assert!(early.is_subset(&session.pressed_keys()));
        }

        #[test]
        fn distance_is_a_metric(
            a in proptest::collection::btree_set(key_strategy(), 0..10),
            b in proptest::collection::btree_set(key_strategy(), 0..10),
            c in proptest::collection::btree_set(key_strategy(), 0..10),
        ) {
            prop_assert_eq!(keyset_distance(&a, &b), keyset_distance(&b, &a));
            prop_assert_eq!(keyset_distance(&a, &a), 0);
            prop_assert!(keyset_distance(&a, &c) <= keyset_distance(&a, &b) + keyset_distance(&b, &c));
        }

        #[test]
        fn two_contacts_superpose(
            k1 in key_strategy(), k2 in key_strategy(),
            t1 in 0.0f64..20.0, t2 in 0.0f64..20.0,
            d1 in 0.05f64..1.0, d2 in 0.05f64..1.0,
            s1 in 0.1f64..1.0, s2 in 0.1f64..1.0,
            extra in 0.0f64..60.0,
        ) {
            let keycap = KeycapSpec::default();
            let env = EnvironmentSpec::default();
            let ev = |key, press_time, contact_duration, contact_area_scale| ContactEvent {
                key, press_time, contact_duration, contact_area_scale, kind: ContactKind::Press,
            };
            let e1 = ev(k1, t1, d1, s1);
            let e2 = ev(k2, t2, d2, s2);
            let t = t1.max(t2) + extra;
            let both = TypingSession::new(vec![e1, e2], TypingStyle::HuntAndPeck, env.ambient_temp).unwrap();
            let one = TypingSession::new(vec![e1], TypingStyle::HuntAndPeck, env.ambient_temp).unwrap();
            let two = TypingSession::new(vec![e2], TypingStyle::HuntAndPeck, env.ambient_temp).unwrap();
            let sum = excess_at(&both, t, &keycap, &env).unwrap();
            let a = excess_at(&one, t, &keycap, &env).unwrap();
            let b = excess_at(&two, t, &keycap, &env).unwrap();
            for key in [k1, k2] {
                let expected = a.get(&key).unwrap_or(&0.0) + b.get(&key).unwrap_or(&0.0);
                let got = sum[&key];
                prop_assert!(((got - expected) / expected).abs() < 1e-9);
            }
        }
    }
}
