//! Seeded synthetic transaction corpora.
//!
//! Each category mixes fresh records (rendered from templates and kept below
//! the near-duplicate threshold against every earlier record of the same
//! category) with near-copies of a few recurring records, like the monthly
//! bills and payrolls that dominate real account histories. Near-copies only
//! change case, punctuation, stopwords or token repetition, so their
//! token-set signature equals the source's.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CategoryId, CategorySet, Dataset, TransactionRecord};
use crate::error::{Error, Result};
use crate::preprocess::{preprocess, GazetteerConfig};
use crate::similarity::{jaccard, SetSignature};

/// Fresh records must stay strictly below this similarity to earlier ones.
const FRESH_LIMIT: f64 = 0.85;
const FRESH_ATTEMPTS: usize = 2_000;

const MONTHS: [&str; 12] = [
    "Enero", "Febrero", "Marzo", "Abril", "Mayo", "Junio", "Julio", "Agosto", "Septiembre", "Octubre",
    "Noviembre", "Diciembre",
];
const FILLER_STOPWORDS: [&str; 6] = ["en", "de", "la", "el", "por", "para"];
const NOISE: [char; 4] = ['*', ':', '-', '/'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTemplate {
    pub label: String,
    /// Slots: `{merchant}`, `{keyword}`, `{name}`, `{month}`, `{digits}`.
    pub templates: Vec<String>,
    pub merchants: Vec<String>,
    pub keywords: Vec<String>,
    /// Signed amount range in euros.
    pub amount_range: (f64, f64),
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub categories: Vec<CategoryTemplate>,
    /// Fillers for `{name}`; they should be in the gazetteer's name list.
    pub names: Vec<String>,
    /// Fraction of each category generated as near-copies.
    pub duplicate_rate: f64,
    /// Near-copies per recurring source, on average.
    pub cluster_size: usize,
    pub seed: u64,
}

struct Spec {
    label: &'static str,
    keywords: &'static [&'static str],
    merchants: &'static [&'static str],
    templates: &'static [&'static str],
    amount: (f64, f64),
}

const REFERENCE: [Spec; 15] = [
    Spec {
        label: "Bank",
        keywords: &["comision", "mantenimiento", "intereses", "cajero", "reintegro", "liquidacion", "custodia", "descubierto", "emision", "apertura"],
        merchants: &["BBVA", "Santander", "Bankinter", "CaixaBank", "Sabadell", "Openbank", "Unicaja", "Kutxabank", "Abanca", "Ibercaja"],
        templates: &["Comision mantenimiento cuenta {merchant} {month}", "Liquidacion intereses {merchant} {digits}", "Reintegro cajero {merchant} {digits}", "Comision emision tarjeta {merchant} {digits}"],
        amount: (-40.0, -0.5),
    },
    Spec {
        label: "Means of transport",
        keywords: &["gasolinera", "peaje", "autopista", "billete", "metro", "parking", "taxi", "combustible", "abono", "tren"],
        merchants: &["Repsol", "Cepsa", "Renfe", "Alsa", "Cabify", "Galp", "Iryo", "Ouigo", "Blablacar", "Empark"],
        templates: &["Compra gasolinera {merchant} {digits}", "Peaje autopista {merchant} {digits}", "Billete tren {merchant} {month} {digits}", "Pago parking {merchant} {digits}"],
        amount: (-95.0, -1.5),
    },
    Spec {
        label: "Shopping",
        keywords: &["supermercado", "tienda", "online", "hipermercado", "moda", "electronica", "libreria", "ferreteria", "perfumeria", "calzado"],
        merchants: &["Mercadona", "Carrefour", "Amazon", "Zara", "Lidl", "Eroski", "Primark", "Decathlon", "Mediamarkt", "Alcampo"],
        templates: &["Compra supermercado {merchant} {digits}", "Compra tienda {merchant} {month} {digits}", "Compra online {merchant} {digits}", "Pago tarjeta {merchant} TARJ. {digits}"],
        amount: (-250.0, -2.0),
    },
    Spec {
        label: "Household expenses",
        keywords: &["electricidad", "suministro", "telefonia", "fibra", "gas", "agua", "comunidad", "propietarios", "basuras", "calefaccion"],
        merchants: &["Iberdrola", "Endesa", "Naturgy", "Orange", "Movistar", "Vodafone", "Holaluz", "Aqualia", "Jazztel", "Lowi"],
        templates: &["Recibo {merchant} {month} {digits}", "Recibo suministro electricidad {merchant} {digits}", "Recibo telefonia fibra {merchant} {digits}", "Cuota comunidad propietarios {digits}"],
        amount: (-190.0, -15.0),
    },
    Spec {
        label: "Taxes and charges",
        keywords: &["impuesto", "tributo", "ayuntamiento", "hacienda", "circulacion", "ibi", "tasa", "multa", "aeat", "modelo"],
        merchants: &["AEAT", "Ayuntamiento Madrid", "Ayuntamiento Sevilla", "DGT", "Diputacion Valencia", "Generalitat", "Catastro", "Suma Gestion", "Atib", "Agencia Tributaria"],
        templates: &["Pago impuesto {merchant} {digits}", "Recibo IBI {merchant} {month}", "Tasa circulacion {merchant} {digits}", "Liquidacion modelo {digits} {merchant}"],
        amount: (-950.0, -25.0),
    },
    Spec {
        label: "Off-cycle income",
        keywords: &["devolucion", "reembolso", "ingreso", "premio", "venta", "bonificacion", "sorteo", "cashback", "indemnizacion", "regularizacion"],
        merchants: &["Wallapop", "Vinted", "Selae", "Devoluciones Fiscales", "Skrill", "Milanuncios", "Ticketmaster", "Groupon", "Booking", "Iberia"],
        templates: &["Devolucion {merchant} {digits}", "Ingreso reembolso {merchant} {month}", "Ingreso venta {merchant} {digits}", "Premio {merchant} {digits}"],
        amount: (15.0, 650.0),
    },
    Spec {
        label: "Payroll",
        keywords: &["nomina", "salario", "haberes", "paga", "extraordinaria", "mensualidad", "retribucion", "sueldo", "finiquito", "atrasos"],
        merchants: &["Telefonica", "Inditex", "Indra", "Airbus", "Ferrovial", "Acciona", "Siemens", "Deloitte", "Accenture", "Seat"],
        templates: &["Transferencia nomina {merchant} {month}", "Abono nomina {month} {merchant} {digits}", "Paga extraordinaria {merchant} {digits}", "Ingreso salario {merchant} {month}"],
        amount: (900.0, 3200.0),
    },
    Spec {
        label: "Leisure",
        keywords: &["restaurante", "cine", "entradas", "concierto", "bar", "cafeteria", "suscripcion", "ocio", "teatro", "hotel"],
        merchants: &["Netflix", "Spotify", "Just Eat", "Glovo", "Telepizza", "Cinesa", "Starbucks", "Vips", "Yelmo", "Steam"],
        templates: &["Compra restaurante {merchant} {digits}", "Suscripcion {merchant} {month}", "Entradas cine {merchant} {digits}", "www.{merchant}.es {digits}"],
        amount: (-130.0, -3.0),
    },
    Spec {
        label: "Health, sport and education",
        keywords: &["farmacia", "gimnasio", "clinica", "dental", "matricula", "academia", "colegio", "optica", "fisioterapia", "universidad"],
        merchants: &["Vivagym", "Basic Fit", "Sanitas Dental", "Vitaldent", "Opticalia", "Multiopticas", "UNED", "Berlitz", "Quiron", "Holmes Place"],
        templates: &["Recibo gimnasio {merchant} {month}", "Compra farmacia {digits}", "Pago clinica dental {merchant} {digits}", "Matricula academia {merchant} {digits}"],
        amount: (-160.0, -8.0),
    },
    Spec {
        label: "Insurances",
        keywords: &["seguro", "poliza", "prima", "hogar", "vida", "automovil", "salud", "decesos", "aseguradora", "renovacion"],
        merchants: &["Mapfre", "Mutua Madrilena", "Allianz", "Axa", "Generali", "Linea Directa", "Zurich", "Ocaso", "Adeslas", "Asisa"],
        templates: &["Recibo seguro hogar {merchant} {digits}", "Poliza vida {merchant} {month}", "Prima seguro automovil {merchant} {digits}", "Renovacion poliza salud {merchant} {digits}"],
        amount: (-650.0, -15.0),
    },
    Spec {
        label: "Social security, grants and pensions",
        keywords: &["pension", "prestacion", "desempleo", "beca", "subsidio", "jubilacion", "ayuda", "inss", "sepe", "orfandad"],
        merchants: &["INSS", "SEPE", "Seguridad Social", "Junta Andalucia", "Consejeria Bienestar", "Ministerio Educacion", "Xunta Galicia", "Gobierno Vasco", "Imserso", "Muface"],
        templates: &["Abono pension jubilacion {merchant} {month}", "Prestacion desempleo {merchant} {digits}", "Ingreso beca {merchant} {digits}", "Subsidio ayuda {merchant} {month}"],
        amount: (250.0, 1500.0),
    },
    Spec {
        label: "Transfers",
        keywords: &["transferencia", "traspaso", "bizum", "emitida", "recibida", "envio", "favor", "inmediata", "periodica", "ordenante"],
        merchants: &["Revolut", "N26", "Wise", "Western Union", "Paypal Europe", "Moneygram", "Ria", "Azimo", "Remitly", "Vivid"],
        templates: &["Transferencia a favor de {name} {name}", "Bizum enviado {name} {digits}", "Traspaso recibido {merchant} {digits}", "Transferencia inmediata {merchant} {name}"],
        amount: (-900.0, 900.0),
    },
    Spec {
        label: "Business and professional expenses",
        keywords: &["autonomo", "reta", "gestoria", "asesoria", "coworking", "profesional", "factura", "proveedor", "licencia", "software"],
        merchants: &["Holded", "Quipu", "Microsoft", "Adobe", "Google Workspace", "Gestoria Lopez Asociados", "Anfix", "Sage", "Dropbox", "Ovh"],
        templates: &["Cuota RETA autonomo {month} {digits}", "Factura asesoria {merchant} {digits}", "Licencia software {merchant} {month}", "Pago proveedor {merchant} {digits}"],
        amount: (-2100.0, -30.0),
    },
    Spec {
        label: "Rentals",
        keywords: &["alquiler", "arrendamiento", "renta", "vivienda", "piso", "local", "garaje", "trastero", "fianza", "mensual"],
        merchants: &["Idealista", "Fotocasa", "Habitaclia", "Inmobiliaria Sol", "Tecnocasa", "Alquila Facil", "Spotahome", "Housfy", "Badi", "Enalquiler"],
        templates: &["Transferencia a favor de {name} concepto alquiler {month} {digits}", "Alquiler vivienda {merchant} {month}", "Renta garaje {merchant} {digits}", "Pago alquiler piso {month} {digits}"],
        amount: (-1400.0, -80.0),
    },
    Spec {
        label: "Others",
        keywords: &["varios", "donacion", "loteria", "cuota", "socio", "asociacion", "ong", "parroquia", "club", "peña"],
        merchants: &["Cruz Roja", "Caritas", "Unicef", "Greenpeace", "Medicos Sin Fronteras", "Loterias Estado", "Club Atletico", "Asociacion Vecinos", "Once", "Manos Unidas"],
        templates: &["Donacion {merchant} {digits}", "Cuota socio {merchant} {month}", "Pago varios {digits}", "Recibo {merchant} {month} {digits}"],
        amount: (-110.0, 110.0),
    },
];

const NAMES: [&str; 16] = [
    "Elvira", "Diego", "Carmen", "Javier", "Lucia", "Pablo", "Marta", "Sergio", "Garcia", "Lopez", "Martinez",
    "Sanchez", "Perez", "Gomez", "Ruiz", "Navarro",
];

impl SynthConfig {
    fn from_specs(records_per_category: usize, duplicate_rate: f64, seed: u64, disjoint: bool) -> Self {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let disjoint_templates = [
            "{keyword} {keyword} {merchant}",
            "{merchant} {keyword} {keyword}",
            "{keyword} {merchant}",
        ];
        SynthConfig {
            categories: REFERENCE
                .iter()
                .map(|s| CategoryTemplate {
                    label: s.label.to_string(),
                    templates: if disjoint { owned(&disjoint_templates) } else { owned(s.templates) },
                    merchants: owned(s.merchants),
                    keywords: owned(s.keywords),
                    amount_range: s.amount,
                    records: records_per_category,
                })
                .collect(),
            names: owned(&NAMES),
            duplicate_rate,
            cluster_size: 60,
            seed,
        }
    }

    /// Realistic Spanish-style templates for the fifteen default categories.
    pub fn reference(records_per_category: usize, duplicate_rate: f64, seed: u64) -> Self {
        SynthConfig::from_specs(records_per_category, duplicate_rate, seed, false)
    }

    /// Templates built only from per-category keywords and merchants, so no
    /// word is shared between categories.
    pub fn disjoint(records_per_category: usize, duplicate_rate: f64, seed: u64) -> Self {
        SynthConfig::from_specs(records_per_category, duplicate_rate, seed, true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.duplicate_rate) {
            return Err(Error::Config(format!(
                "duplicate rate must lie in [0, 1], got {}",
                self.duplicate_rate
            )));
        }
        if self.categories.is_empty() {
            return Err(Error::Config("synthetic config has no categories".into()));
        }
        if self.cluster_size == 0 {
            return Err(Error::Config("cluster size must be positive".into()));
        }
        for c in &self.categories {
            if c.templates.is_empty() {
                return Err(Error::Config(format!("category `{}` has no templates", c.label)));
            }
            if c.records == 0 {
                return Err(Error::Config(format!("category `{}` has no records", c.label)));
            }
            let (lo, hi) = c.amount_range;
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("category `{}` has an invalid amount range", c.label)));
            }
            for t in &c.templates {
                for slot in slots(t) {
                    let empty = match slot {
                        "merchant" => c.merchants.is_empty(),
                        "keyword" => c.keywords.is_empty(),
                        "name" => self.names.is_empty(),
                        "month" | "digits" => false,
                        other => {
                            return Err(Error::Config(format!("unknown template slot `{{{other}}}`")));
                        }
                    };
                    if empty {
                        return Err(Error::Config(format!("category `{}` uses `{{{slot}}}` without fillers", c.label)));
                    }
                }
            }
        }
        Ok(())
    }
}

fn slots(template: &str) -> impl Iterator<Item = &str> {
    template
        .split('{')
        .skip(1)
        .filter_map(|rest| rest.split_once('}').map(|(slot, _)| slot))
}

fn render(template: &str, cat: &CategoryTemplate, names: &[String], rng: &mut impl Rng) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("validated template");
        let slot = &rest[open + 1..close];
        match slot {
            "merchant" => out.push_str(cat.merchants.choose(rng).expect("validated")),
            "keyword" => out.push_str(cat.keywords.choose(rng).expect("validated")),
            "name" => out.push_str(names.choose(rng).expect("validated")),
            "month" => out.push_str(MONTHS.choose(rng).expect("non-empty")),
            "digits" => {
                let len = rng.gen_range(4..=6);
                for _ in 0..len {
                    out.push(char::from(b'0' + rng.gen_range(0..10u8)));
                }
            }
            _ => unreachable!("validated slot"),
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// Token-level edits that leave the content-token set unchanged.
fn perturb(description: &str, rng: &mut impl Rng) -> String {
    let mut tokens: Vec<String> = description.split_whitespace().map(str::to_string).collect();
    let edits = rng.gen_range(1..=2);
    for _ in 0..edits {
        if tokens.is_empty() {
            break;
        }
        let at = rng.gen_range(0..tokens.len());
        match rng.gen_range(0..4) {
            0 => {
                let t = &tokens[at];
                tokens[at] = match rng.gen_range(0..3) {
                    0 => t.to_uppercase(),
                    1 => t.to_lowercase(),
                    _ => {
                        let mut chars = t.chars();
                        chars.next().map_or_else(String::new, |f| {
                            f.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect()
                        })
                    }
                };
            }
            1 => tokens.insert(at, FILLER_STOPWORDS.choose(rng).expect("non-empty").to_string()),
            2 => {
                let mark = *NOISE.choose(rng).expect("non-empty");
                tokens[at].insert(0, mark);
            }
            _ => {
                let t = tokens[at].clone();
                tokens.insert(at, t);
            }
        }
    }
    tokens.join(" ")
}

fn random_id(rng: &mut impl RngCore) -> String {
    format!("{:016x}{:08x}", rng.next_u64(), rng.next_u32())
}

fn random_date(rng: &mut impl Rng) -> NaiveDate {
    let start = NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date");
    start + chrono::Duration::days(rng.gen_range(0..730))
}

fn random_amount(range: (f64, f64), rng: &mut impl Rng) -> f64 {
    let v = if range.0 == range.1 { range.0 } else { rng.gen_range(range.0..range.1) };
    (v * 100.0).round() / 100.0
}

/// Number of near-copies for a category of `records` at `rate`; the first
/// record is always fresh.
pub(crate) fn duplicate_count(records: usize, rate: f64) -> usize {
    let fresh = ((1.0 - rate) * records as f64).round().max(1.0) as usize;
    records.saturating_sub(fresh)
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let categories = CategorySet::new(config.categories.iter().map(|c| c.label.clone()))?;
    let gazetteer = GazetteerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();

    for (ci, cat) in config.categories.iter().enumerate() {
        let category = Some(CategoryId(ci as u16));
        let duplicates = duplicate_count(cat.records, config.duplicate_rate);
        let fresh = cat.records - duplicates;
        let mut signatures: Vec<SetSignature> = Vec::with_capacity(fresh);
        let mut local: Vec<TransactionRecord> = Vec::with_capacity(cat.records);

        for _ in 0..fresh {
            let mut made = None;
            for _ in 0..FRESH_ATTEMPTS {
                let template = cat.templates.choose(&mut rng).expect("validated");
                let description = render(template, cat, &config.names, &mut rng);
                let sig = SetSignature::of(&preprocess(&description, &gazetteer));
                if signatures.iter().all(|s| jaccard(s, &sig) < FRESH_LIMIT) {
                    made = Some((description, sig));
                    break;
                }
            }
            let (description, sig) = made.ok_or_else(|| {
                Error::Config(format!(
                    "could not generate {fresh} distinct descriptions for `{}`; add templates or fillers",
                    cat.label
                ))
            })?;
            signatures.push(sig);
            local.push(TransactionRecord {
                id: random_id(&mut rng),
                description,
                amount: random_amount(cat.amount_range, &mut rng),
                date: random_date(&mut rng),
                category,
            });
        }

        let sources = duplicates.div_ceil(config.cluster_size).min(fresh);
        for _ in 0..duplicates {
            let source = &local[rng.gen_range(0..sources)];
            let description = perturb(&source.description, &mut rng);
            let amount = source.amount;
            local.push(TransactionRecord {
                id: random_id(&mut rng),
                description,
                amount,
                date: random_date(&mut rng),
                category,
            });
        }
        records.extend(local);
    }
    records.shuffle(&mut rng);
    Dataset::new(records, categories)
}
