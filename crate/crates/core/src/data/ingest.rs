use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Era, PlayRecord};
use crate::error::{Error, Result};

/// Canonical field names and whether each is required in the CSV header.
pub const CANONICAL_COLUMNS: &[(&str, bool)] = &[
    ("game_id", true),
    ("drive_id", true),
    ("play_index", true),
    ("season", true),
    ("win_loss", true),
    ("game_seconds_remaining", true),
    ("score_differential", true),
    ("total_score", true),
    ("posteam_spread", true),
    ("total_points_line", true),
    ("yardline", true),
    ("ydstogo", true),
    ("down", true),
    ("posteam_timeouts", true),
    ("defteam_timeouts", true),
    ("receive_2h_ko", true),
    ("home", true),
    ("roof", true),
    ("posteam_coach", true),
    ("kicker_id", false),
    ("punter_id", false),
    ("play_type", true),
    ("yards_gained", false),
    ("fg_made", false),
    ("next_yardline_after_punt", false),
];

/// Maps canonical field names to the CSV headers that carry them.
///
/// Fields absent from the map are looked up under their canonical name.
/// On disk this is a flat key-value file: `canonical_field = "CSV header"`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMap {
    pub renames: BTreeMap<String, String>,
}

impl ColumnMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let map: ColumnMap = toml::from_str(text)?;
        for key in map.renames.keys() {
            if !CANONICAL_COLUMNS.iter().any(|(c, _)| c == key) {
                return Err(Error::Schema(format!("column map names unknown field '{key}'")));
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn header_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

/// A row diverted from the accepted set, with its 1-based data row number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub row: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub plays: Vec<PlayRecord>,
    pub rejects: Vec<Reject>,
    pub rows_read: usize,
}

struct Columns {
    index: HashMap<&'static str, usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let mut index = HashMap::new();
        let mut missing = Vec::new();
        for &(canonical, required) in CANONICAL_COLUMNS {
            let header = map.header_for(canonical);
            match headers.iter().position(|h| h.trim() == header) {
                Some(i) => {
                    index.insert(canonical, i);
                }
                None if required => missing.push(if header == canonical {
                    canonical.to_string()
                } else {
                    format!("{canonical} (header '{header}')")
                }),
                None => {}
            }
        }
        if !missing.is_empty() {
            return Err(Error::Schema(format!(
                "missing required column(s): {}",
                missing.join(", ")
            )));
        }
        Ok(Columns { index })
    }

    fn cell<'r>(&self, record: &'r csv::StringRecord, field: &str) -> Option<&'r str> {
        self.index
            .get(field)
            .and_then(|&i| record.get(i))
            .map(str::trim)
    }
}

fn required<'r>(cols: &Columns, rec: &'r csv::StringRecord, field: &str) -> Result<&'r str, String> {
    match cols.cell(rec, field) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing value for {field}")),
    }
}

fn num<T: std::str::FromStr>(cols: &Columns, rec: &csv::StringRecord, field: &str) -> Result<T, String> {
    let raw = required(cols, rec, field)?;
    raw.parse()
        .map_err(|_| format!("unparseable {field}: '{raw}'"))
}

fn opt_num<T: std::str::FromStr>(
    cols: &Columns,
    rec: &csv::StringRecord,
    field: &str,
) -> Result<Option<T>, String> {
    match cols.cell(rec, field) {
        None | Some("") | Some("NA") => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| format!("unparseable {field}: '{raw}'")),
    }
}

fn parse_flag(raw: &str, field: &str) -> Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(format!("unparseable {field}: '{raw}'")),
    }
}

fn flag(cols: &Columns, rec: &csv::StringRecord, field: &str) -> Result<bool, String> {
    parse_flag(required(cols, rec, field)?, field)
}

fn opt_flag(cols: &Columns, rec: &csv::StringRecord, field: &str) -> Result<Option<bool>, String> {
    match cols.cell(rec, field) {
        None | Some("") | Some("NA") => Ok(None),
        Some(raw) => parse_flag(raw, field).map(Some),
    }
}

fn opt_text(cols: &Columns, rec: &csv::StringRecord, field: &str) -> Option<String> {
    match cols.cell(rec, field) {
        None | Some("") | Some("NA") => None,
        Some(v) => Some(v.to_string()),
    }
}

fn parse_row(cols: &Columns, rec: &csv::StringRecord) -> Result<PlayRecord, String> {
    let season: u16 = num(cols, rec, "season")?;
    let era = Era::from_season(season).ok_or_else(|| format!("season {season} has no era"))?;
    let play = PlayRecord {
        game_id: required(cols, rec, "game_id")?.to_string(),
        drive_id: required(cols, rec, "drive_id")?.to_string(),
        play_index: num(cols, rec, "play_index")?,
        season,
        era,
        win_loss: flag(cols, rec, "win_loss")?,
        game_seconds_remaining: num(cols, rec, "game_seconds_remaining")?,
        score_differential: num(cols, rec, "score_differential")?,
        total_score: num(cols, rec, "total_score")?,
        posteam_spread: num(cols, rec, "posteam_spread")?,
        total_points_line: num(cols, rec, "total_points_line")?,
        yardline: num(cols, rec, "yardline")?,
        ydstogo: num(cols, rec, "ydstogo")?,
        down: num(cols, rec, "down")?,
        posteam_timeouts: num(cols, rec, "posteam_timeouts")?,
        defteam_timeouts: num(cols, rec, "defteam_timeouts")?,
        receive_2h_ko: flag(cols, rec, "receive_2h_ko")?,
        home: flag(cols, rec, "home")?,
        roof: required(cols, rec, "roof")?.parse()?,
        posteam_coach: required(cols, rec, "posteam_coach")?.to_string(),
        kicker_id: opt_text(cols, rec, "kicker_id"),
        punter_id: opt_text(cols, rec, "punter_id"),
        play_type: required(cols, rec, "play_type")?.parse()?,
        yards_gained: opt_num(cols, rec, "yards_gained")?,
        fg_made: opt_flag(cols, rec, "fg_made")?,
        next_yardline_after_punt: opt_num(cols, rec, "next_yardline_after_punt")?,
    };
    play.validate()?;
    Ok(play)
}

/// Parses a play-by-play CSV.
///
/// Schema problems (a required column the map cannot resolve) are fatal.
/// Row problems divert the row to the reject list, so that
/// `plays.len() + rejects.len() == rows_read` always holds. After row checks,
/// every game is checked for a consistent win/loss orientation: plays of the
/// same coach must agree, and two coaches in one game cannot both have won or
/// both have lost. Games failing that check are rejected as a whole.
pub fn parse_plays<R: Read>(source: R, map: &ColumnMap) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = Columns::resolve(&headers, map)?;

    let mut accepted: Vec<(usize, PlayRecord)> = Vec::new();
    let mut rejects = Vec::new();
    let mut rows_read = 0;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        rows_read += 1;
        match rec {
            Ok(rec) => match parse_row(&cols, &rec) {
                Ok(play) => accepted.push((row, play)),
                Err(reason) => rejects.push(Reject { row, reason }),
            },
            Err(e) => rejects.push(Reject {
                row,
                reason: format!("malformed record: {e}"),
            }),
        }
    }

    let bad_games = inconsistent_games(accepted.iter().map(|(_, p)| p));
    let mut plays = Vec::with_capacity(accepted.len());
    for (row, play) in accepted {
        if bad_games.contains_key(play.game_id.as_str()) {
            rejects.push(Reject {
                row,
                reason: "inconsistent win_loss orientation within game".into(),
            });
        } else {
            plays.push(play);
        }
    }
    rejects.sort_by_key(|r| r.row);
    Ok(ParseOutcome {
        plays,
        rejects,
        rows_read,
    })
}

fn inconsistent_games<'a>(plays: impl Iterator<Item = &'a PlayRecord>) -> HashMap<String, ()> {
    let mut by_game: HashMap<&str, HashMap<&str, (bool, bool)>> = HashMap::new();
    for p in plays {
        let seen = by_game
            .entry(&p.game_id)
            .or_default()
            .entry(&p.posteam_coach)
            .or_insert((false, false));
        if p.win_loss {
            seen.0 = true;
        } else {
            seen.1 = true;
        }
    }
    let mut bad = HashMap::new();
    for (game, coaches) in by_game {
        let mixed = coaches.values().any(|&(w, l)| w && l);
        let winners = coaches.values().filter(|&&(w, _)| w).count();
        let losers = coaches.values().filter(|&&(_, l)| l).count();
        if mixed || winners > 1 || losers > 1 {
            bad.insert(game.to_string(), ());
        }
    }
    bad
}

fn flag_str(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes plays under their canonical headers; `parse_plays` reads them back
/// to identical records.
pub fn write_plays_csv<W: Write>(sink: W, plays: &[PlayRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CANONICAL_COLUMNS.iter().map(|(c, _)| *c))?;
    for p in plays {
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            p.game_id.clone(),
            p.drive_id.clone(),
            p.play_index.to_string(),
            p.season.to_string(),
            flag_str(p.win_loss).to_string(),
            p.game_seconds_remaining.to_string(),
            p.score_differential.to_string(),
            p.total_score.to_string(),
            p.posteam_spread.to_string(),
            p.total_points_line.to_string(),
            p.yardline.to_string(),
            p.ydstogo.to_string(),
            p.down.to_string(),
            p.posteam_timeouts.to_string(),
            p.defteam_timeouts.to_string(),
            flag_str(p.receive_2h_ko).to_string(),
            flag_str(p.home).to_string(),
            p.roof.to_string(),
            p.posteam_coach.clone(),
            opt(p.kicker_id.clone()),
            opt(p.punter_id.clone()),
            p.play_type.to_string(),
            opt(p.yards_gained.map(|v| v.to_string())),
            opt(p.fg_made.map(|v| flag_str(v).to_string())),
            opt(p.next_yardline_after_punt.map(|v| v.to_string())),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv sink>", e))?;
    Ok(())
}

/// Line-delimited JSON dump of accepted records.
pub fn write_jsonl<W: Write>(mut sink: W, plays: &[PlayRecord]) -> Result<()> {
    for p in plays {
        serde_json::to_writer(&mut sink, p)?;
        sink.write_all(b"\n").map_err(|e| Error::io("<jsonl sink>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(source: R) -> Result<Vec<PlayRecord>> {
    let mut plays = Vec::new();
    for line in source.lines() {
        let line = line.map_err(|e| Error::io("<jsonl source>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        plays.push(serde_json::from_str(&line)?);
    }
    Ok(plays)
}

/// Reject log, one `row_number<TAB>reason` line per rejected row.
pub fn write_reject_log<W: Write>(mut sink: W, rejects: &[Reject]) -> Result<()> {
    for r in rejects {
        writeln!(sink, "{}\t{}", r.row, r.reason).map_err(|e| Error::io("<reject log>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "game_id,drive_id,play_index,season,win_loss,game_seconds_remaining,score_differential,total_score,posteam_spread,total_points_line,yardline,ydstogo,down,posteam_timeouts,defteam_timeouts,receive_2h_ko,home,roof,posteam_coach,kicker_id,punter_id,play_type,yards_gained,fg_made,next_yardline_after_punt";

    fn row(game: &str, coach: &str, win: u8, secs: u32, yl: u8, togo: u8, down: u8) -> String {
        format!("{game},{game}-1,1,2019,{win},{secs},-3,10,-2.5,44.5,{yl},{togo},{down},3,2,1,0,outdoors,{coach},K1,P1,go,3,,")
    }

    fn parse(body: &str) -> ParseOutcome {
        let text = format!("{HEADER}\n{body}");
        parse_plays(text.as_bytes(), &ColumnMap::identity()).unwrap()
    }

    #[test]
    fn fourth_and_two_at_36_is_valid() {
        let out = parse(&row("g1", "A", 1, 445, 36, 2, 4));
        assert!(out.rejects.is_empty(), "{:?}", out.rejects);
        let p = &out.plays[0];
        assert_eq!((p.down, p.yardline, p.ydstogo), (4, 36, 2));
        assert_eq!(p.era, Era::Y2018On);
    }

    #[test]
    fn ydstogo_beyond_yardline_is_rejected() {
        let out = parse(&row("g1", "A", 1, 445, 10, 15, 3));
        assert!(out.plays.is_empty());
        assert_eq!(
            out.rejects,
            vec![Reject {
                row: 1,
                reason: "ydstogo exceeds yardline".into()
            }]
        );
    }

    #[test]
    fn opening_play_clock_is_valid() {
        let out = parse(&row("g1", "A", 1, 3600, 75, 10, 1));
        assert_eq!(out.plays.len(), 1);
        let out = parse(&row("g1", "A", 1, 3601, 75, 10, 1));
        assert_eq!(out.rejects.len(), 1);
    }

    #[test]
    fn unparseable_number_is_row_level() {
        let body = format!(
            "{}\n{}",
            row("g1", "A", 1, 445, 36, 2, 4).replace(",445,", ",abc,"),
            row("g2", "B", 0, 445, 36, 2, 4)
        );
        let out = parse(&body);
        assert_eq!(out.plays.len(), 1);
        assert_eq!(out.rejects[0].row, 1);
        assert!(out.rejects[0].reason.contains("game_seconds_remaining"));
        assert_eq!(out.plays.len() + out.rejects.len(), out.rows_read);
    }

    #[test]
    fn missing_required_column_is_fatal() {
        let text = "game_id,drive_id\ng1,d1\n";
        let err = parse_plays(text.as_bytes(), &ColumnMap::identity()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn renamed_headers_resolve_through_the_map() {
        let text = format!(
            "{}\n{}",
            HEADER.replace("ydstogo", "yards_to_go"),
            row("g1", "A", 1, 445, 36, 2, 4)
        );
        let map = ColumnMap::from_toml_str("ydstogo = \"yards_to_go\"\n").unwrap();
        let out = parse_plays(text.as_bytes(), &map).unwrap();
        assert_eq!(out.plays.len(), 1);
        assert!(parse_plays(text.as_bytes(), &ColumnMap::identity()).is_err());
    }

    #[test]
    fn unknown_map_key_is_a_schema_error() {
        assert!(ColumnMap::from_toml_str("yardage = \"x\"\n").is_err());
    }

    #[test]
    fn inconsistent_game_orientation_rejects_the_game() {
        let body = [
            row("g1", "A", 1, 445, 36, 2, 4),
            row("g1", "B", 1, 400, 50, 2, 1),
            row("g2", "A", 1, 445, 36, 2, 4),
            row("g2", "B", 0, 400, 50, 2, 1),
        ]
        .join("\n");
        let out = parse(&body);
        assert_eq!(out.plays.len(), 2);
        assert!(out.plays.iter().all(|p| p.game_id == "g2"));
        assert_eq!(out.rejects.len(), 2);
        assert!(out.rejects[0].reason.contains("orientation"));
    }

    #[test]
    fn reject_log_format() {
        let mut buf = Vec::new();
        write_reject_log(
            &mut buf,
            &[Reject {
                row: 7,
                reason: "ydstogo exceeds yardline".into(),
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "7\tydstogo exceeds yardline\n");
    }
}
