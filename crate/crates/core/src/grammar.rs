//! Language-based action space.
//!
//! Two action families share one text channel:
//!
//! * structured actions (`Turn left 30.0 degrees`, `Left sidewalk 0.40 meters`)
//!   carry a typed kind, a direction and a positive magnitude;
//! * natural-language actions are free text routed to a downstream executor
//!   (speech, gesture, manipulation) by keyword, plus the stop sentinel.
//!
//! A policy emits an [`ActionSequence`]: clauses separated by `;`, with at most
//! one natural-language action, always last.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel natural-language action meaning "task done, wait for a new instruction".
pub const STOP_PHRASE: &str = "Stop and no action";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrammarError {
    #[error("clause matches no structured action template: {0:?}")]
    UnrecognizedForm(String),
    #[error("magnitude must be positive, got {0}")]
    NonPositiveMagnitude(f64),
    #[error("direction `{direction}` is not legal for {kind} actions")]
    IllegalDirection { kind: SlaKind, direction: String },
    #[error("natural language action text is empty")]
    EmptyText,
    #[error("action sequence is empty")]
    EmptySequence,
    #[error("clause {index} follows the terminal natural language action")]
    TrailingClauseAfterNla { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlaKind {
    Turn,
    Look,
    Move,
    Sidewalk,
    Height,
}

impl SlaKind {
    /// Fixed emission order used by aggregation and merging.
    pub const ALL: [SlaKind; 5] = [
        SlaKind::Turn,
        SlaKind::Look,
        SlaKind::Move,
        SlaKind::Sidewalk,
        SlaKind::Height,
    ];

    pub fn unit(self) -> Unit {
        match self {
            SlaKind::Turn | SlaKind::Look => Unit::Degrees,
            SlaKind::Move | SlaKind::Sidewalk | SlaKind::Height => Unit::Meters,
        }
    }

    /// Direction whose signed magnitude is positive (left, up, forward, left, rise).
    pub fn positive(self) -> Direction {
        match self {
            SlaKind::Turn | SlaKind::Sidewalk => Direction::Left,
            SlaKind::Look => Direction::Up,
            SlaKind::Move => Direction::Forward,
            SlaKind::Height => Direction::Rise,
        }
    }

    pub fn negative(self) -> Direction {
        match self {
            SlaKind::Turn | SlaKind::Sidewalk => Direction::Right,
            SlaKind::Look => Direction::Down,
            SlaKind::Move => Direction::Backward,
            SlaKind::Height => Direction::Lower,
        }
    }

    pub fn admits(self, direction: Direction) -> bool {
        direction == self.positive() || direction == self.negative()
    }
}

impl fmt::Display for SlaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SlaKind::Turn => "turn",
            SlaKind::Look => "look",
            SlaKind::Move => "move",
            SlaKind::Sidewalk => "sidewalk",
            SlaKind::Height => "height",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Degrees,
    Meters,
}

impl Unit {
    /// Decimal places in the canonical text form.
    pub fn decimals(self) -> usize {
        match self {
            Unit::Degrees => 1,
            Unit::Meters => 2,
        }
    }

    /// Smallest magnitude representable in canonical form.
    pub fn quantum(self) -> f64 {
        match self {
            Unit::Degrees => 0.1,
            Unit::Meters => 0.01,
        }
    }

    fn word(self) -> &'static str {
        match self {
            Unit::Degrees => "degrees",
            Unit::Meters => "meters",
        }
    }

    fn matches(self, token: &str) -> bool {
        match self {
            Unit::Degrees => matches!(token, "degrees" | "degree" | "deg"),
            Unit::Meters => matches!(token, "meters" | "meter" | "m" | "metres" | "metre"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
    Forward,
    Backward,
    Rise,
    Lower,
}

impl Direction {
    pub fn word(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Rise => "rise",
            Direction::Lower => "lower",
        }
    }

    /// Words that may follow a verb (`Turn left`, `Look up`, `Move forward`).
    fn from_word(word: &str) -> Option<Direction> {
        Some(match word {
            "left" => Direction::Left,
            "right" => Direction::Right,
            "up" => Direction::Up,
            "down" => Direction::Down,
            "forward" | "forwards" => Direction::Forward,
            "backward" | "backwards" => Direction::Backward,
            _ => return None,
        })
    }
}

/// One typed locomotion or perception primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStructuredAction")]
pub struct StructuredAction {
    kind: SlaKind,
    direction: Direction,
    magnitude: f64,
}

#[derive(Deserialize)]
struct RawStructuredAction {
    kind: SlaKind,
    direction: Direction,
    magnitude: f64,
}

impl TryFrom<RawStructuredAction> for StructuredAction {
    type Error = GrammarError;

    fn try_from(raw: RawStructuredAction) -> Result<Self, Self::Error> {
        StructuredAction::new(raw.kind, raw.direction, raw.magnitude)
    }
}

impl StructuredAction {
    pub fn new(kind: SlaKind, direction: Direction, magnitude: f64) -> Result<Self, GrammarError> {
        if !kind.admits(direction) {
            return Err(GrammarError::IllegalDirection {
                kind,
                direction: direction.word().to_string(),
            });
        }
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(GrammarError::NonPositiveMagnitude(magnitude));
        }
        Ok(Self {
            kind,
            direction,
            magnitude,
        })
    }

    /// Builds an action from a signed axis value (positive = left/up/forward/rise).
    /// Returns `None` for zero or non-finite values.
    pub fn from_signed(kind: SlaKind, value: f64) -> Option<Self> {
        if value == 0.0 || !value.is_finite() {
            return None;
        }
        let direction = if value > 0.0 { kind.positive() } else { kind.negative() };
        Some(Self {
            kind,
            direction,
            magnitude: value.abs(),
        })
    }

    pub fn kind(&self) -> SlaKind {
        self.kind
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn signed_magnitude(&self) -> f64 {
        if self.direction == self.kind.positive() {
            self.magnitude
        } else {
            -self.magnitude
        }
    }

    /// Magnitude rounded to the canonical text precision, never below one quantum.
    pub fn canonical(&self) -> Self {
        Self {
            magnitude: canonical_magnitude(self.kind.unit(), self.magnitude),
            ..*self
        }
    }
}

fn canonical_magnitude(unit: Unit, magnitude: f64) -> f64 {
    let text = format!("{:.*}", unit.decimals(), magnitude);
    let rounded: f64 = text.parse().unwrap_or(magnitude);
    if rounded > 0.0 {
        rounded
    } else {
        unit.quantum()
    }
}

impl fmt::Display for StructuredAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = self.kind.unit();
        let mag = canonical_magnitude(unit, self.magnitude);
        let prec = unit.decimals();
        let words = unit.word();
        match self.kind {
            SlaKind::Turn | SlaKind::Look | SlaKind::Move => {
                let verb = match self.kind {
                    SlaKind::Turn => "Turn",
                    SlaKind::Look => "Look",
                    _ => "Move",
                };
                write!(f, "{verb} {} {mag:.prec$} {words}", self.direction.word())
            }
            SlaKind::Sidewalk => {
                let side = if self.direction == Direction::Left {
                    "Left"
                } else {
                    "Right"
                };
                write!(f, "{side} sidewalk {mag:.prec$} {words}")
            }
            SlaKind::Height => {
                let phrase = if self.direction == Direction::Rise {
                    "Rise up"
                } else {
                    "Lower down"
                };
                write!(f, "{phrase} {mag:.prec$} {words}")
            }
        }
    }
}

/// Parses one clause as a structured action.
///
/// Keywords are case-insensitive and surrounding whitespace is ignored. A
/// clause that does not have the shape of any template yields
/// [`GrammarError::UnrecognizedForm`]; callers treat it as a natural-language
/// candidate.
pub fn parse_sla(text: &str) -> Result<StructuredAction, GrammarError> {
    let unrecognized = || GrammarError::UnrecognizedForm(text.to_string());
    let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let [first, second, number, unit] = tokens.as_slice() else {
        return Err(unrecognized());
    };

    // (kind, direction word as written, implied direction for height verbs)
    let (kind, dir_word, height_dir) = match first.as_str() {
        "turn" => (SlaKind::Turn, second.as_str(), None),
        "look" => (SlaKind::Look, second.as_str(), None),
        "move" => (SlaKind::Move, second.as_str(), None),
        "rise" => (SlaKind::Height, second.as_str(), Some((Direction::Rise, Direction::Up))),
        "lower" => (
            SlaKind::Height,
            second.as_str(),
            Some((Direction::Lower, Direction::Down)),
        ),
        _ if second == "sidewalk" => (SlaKind::Sidewalk, first.as_str(), None),
        _ => return Err(unrecognized()),
    };

    if !kind.unit().matches(unit) {
        return Err(unrecognized());
    }
    let magnitude = parse_decimal(number).ok_or_else(unrecognized)?;
    let written = Direction::from_word(dir_word).ok_or_else(unrecognized)?;

    let direction = match height_dir {
        Some((implied, required)) if written == required => implied,
        Some(_) => {
            return Err(GrammarError::IllegalDirection {
                kind,
                direction: dir_word.to_string(),
            })
        }
        None => written,
    };
    if !kind.admits(direction) {
        return Err(GrammarError::IllegalDirection {
            kind,
            direction: dir_word.to_string(),
        });
    }
    if magnitude.is_nan() || magnitude <= 0.0 {
        return Err(GrammarError::NonPositiveMagnitude(magnitude));
    }
    Ok(StructuredAction {
        kind,
        direction,
        magnitude,
    })
}

/// `[+-]? (digits ('.' digits?)? | '.' digits)`, finite.
fn parse_decimal(token: &str) -> Option<f64> {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    let ok = digits(int) && frac.is_none_or(digits) && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()));
    if !ok {
        return None;
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Speech,
    Gesture,
    Manipulation,
    Stop,
}

/// Keyword lists for natural-language routing. Matching is on lowercase,
/// whitespace-collapsed text; a keyword matches when the action text starts
/// with it at a word boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouterConfig {
    pub speech_keywords: Vec<String>,
    pub gesture_keywords: Vec<String>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            speech_keywords: vec!["speak".into(), "ask".into()],
            gesture_keywords: vec!["say hi".into(), "shake hands".into(), "confirm".into(), "deny".into()],
        }
    }
}

impl RouterConfig {
    fn matches_any(keywords: &[String], normalized: &str) -> bool {
        keywords.iter().any(|k| {
            let k = normalize(k);
            !k.is_empty()
                && normalized.starts_with(&k)
                && normalized[k.len()..]
                    .chars()
                    .next()
                    .is_none_or(|c| !c.is_alphanumeric())
        })
    }
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Free-form terminal action with its executor route.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaturalAction {
    text: String,
    route: Route,
}

impl NaturalAction {
    pub fn stop() -> Self {
        Self {
            text: STOP_PHRASE.to_string(),
            route: Route::Stop,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn is_stop(&self) -> bool {
        self.route == Route::Stop
    }

    fn canonical(&self) -> Self {
        if self.is_stop() {
            return Self::stop();
        }
        Self {
            text: self.text.replace(';', ","),
            route: self.route,
        }
    }
}

impl fmt::Display for NaturalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn is_stop_phrase(text: &str) -> bool {
    normalize(text) == normalize(STOP_PHRASE)
}

/// Routes free text by keyword: Stop, then Speech, then Gesture, else Manipulation.
pub fn route_nla(text: &str, config: &RouterConfig) -> Result<NaturalAction, GrammarError> {
    let collapsed = collapse_whitespace(text);
    if collapsed.is_empty() {
        return Err(GrammarError::EmptyText);
    }
    if is_stop_phrase(&collapsed) {
        return Ok(NaturalAction::stop());
    }
    let normalized = collapsed.to_lowercase();
    let route = if RouterConfig::matches_any(&config.speech_keywords, &normalized) {
        Route::Speech
    } else if RouterConfig::matches_any(&config.gesture_keywords, &normalized) {
        Route::Gesture
    } else {
        Route::Manipulation
    };
    Ok(NaturalAction { text: collapsed, route })
}

/// Ordered structured actions optionally terminated by one natural-language action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct ActionSequence {
    slas: Vec<StructuredAction>,
    terminal: Option<NaturalAction>,
}

#[derive(Deserialize)]
struct RawSequence {
    #[serde(default)]
    slas: Vec<StructuredAction>,
    terminal: Option<NaturalAction>,
}

impl TryFrom<RawSequence> for ActionSequence {
    type Error = GrammarError;

    fn try_from(raw: RawSequence) -> Result<Self, Self::Error> {
        ActionSequence::new(raw.slas, raw.terminal)
    }
}

impl ActionSequence {
    pub fn new(slas: Vec<StructuredAction>, terminal: Option<NaturalAction>) -> Result<Self, GrammarError> {
        if slas.is_empty() && terminal.is_none() {
            return Err(GrammarError::EmptySequence);
        }
        Ok(Self { slas, terminal })
    }

    pub fn stop() -> Self {
        Self {
            slas: Vec::new(),
            terminal: Some(NaturalAction::stop()),
        }
    }

    pub fn slas(&self) -> &[StructuredAction] {
        &self.slas
    }

    pub fn terminal(&self) -> Option<&NaturalAction> {
        self.terminal.as_ref()
    }

    pub fn is_stop(&self) -> bool {
        self.slas.is_empty() && self.terminal.as_ref().is_some_and(NaturalAction::is_stop)
    }

    /// The form `parse_sequence(serialize(s))` returns: magnitudes rounded to
    /// canonical precision, `;` removed from natural-language text.
    pub fn canonicalize(&self) -> Self {
        Self {
            slas: self.slas.iter().map(StructuredAction::canonical).collect(),
            terminal: self.terminal.as_ref().map(NaturalAction::canonical),
        }
    }
}

impl fmt::Display for ActionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

pub fn parse_sequence(text: &str) -> Result<ActionSequence, GrammarError> {
    parse_sequence_with(text, &RouterConfig::default())
}

/// Splits on `;`, parsing each clause as a structured action when it matches a
/// template and routing it as a natural-language action otherwise. Empty
/// clauses (e.g. a trailing `;`) are skipped.
pub fn parse_sequence_with(text: &str, router: &RouterConfig) -> Result<ActionSequence, GrammarError> {
    let mut slas = Vec::new();
    let mut terminal: Option<NaturalAction> = None;
    for (index, clause) in text.split(';').enumerate() {
        let clause = clause.trim();
        if clause.is_empty() {
            continue;
        }
        if terminal.is_some() {
            return Err(GrammarError::TrailingClauseAfterNla { index });
        }
        match parse_sla(clause) {
            Ok(sla) => slas.push(sla),
            Err(GrammarError::UnrecognizedForm(_)) => terminal = Some(route_nla(clause, router)?),
            Err(e) => return Err(e),
        }
    }
    ActionSequence::new(slas, terminal)
}

/// Canonical text form: clauses joined by `"; "`, one decimal for degrees and
/// two for meters.
pub fn serialize(seq: &ActionSequence) -> String {
    let mut clauses: Vec<String> = seq.slas.iter().map(ToString::to_string).collect();
    if let Some(nla) = &seq.terminal {
        clauses.push(nla.canonical().text);
    }
    clauses.join("; ")
}
