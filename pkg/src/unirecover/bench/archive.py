import json
import uuid
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional

from sqlalchemy import JSON, Boolean, Column, DateTime, ForeignKey, Integer, String, create_engine
from sqlalchemy.orm import Session, declarative_base, relationship
from sqlalchemy.pool import StaticPool

from unirecover.bench.records import ExperimentRun, schema_tag
from unirecover.config import get_settings

Base = declarative_base()


class RunModel(Base):
    __tablename__ = "runs"

    id = Column(String, primary_key=True)
    kind = Column(String, nullable=False)
    schema = Column(String, nullable=False)
    config = Column(JSON, nullable=False)
    summary = Column(JSON, nullable=False)
    passed = Column(Boolean, nullable=False)
    created_at = Column(DateTime, nullable=False)

    rows = relationship("RowModel", back_populates="run", order_by="RowModel.position")


class RowModel(Base):
    __tablename__ = "rows"

    id = Column(String, primary_key=True)
    run_id = Column(String, ForeignKey("runs.id"), nullable=False)
    position = Column(Integer, nullable=False)
    content = Column(JSON, nullable=False)

    run = relationship("RunModel", back_populates="rows")


@dataclass
class Run:
    id: str
    kind: str
    schema: str
    config: Dict[str, Any]
    summary: Dict[str, Any]
    passed: bool
    created_at: datetime

    @classmethod
    def from_db(cls, db_model: RunModel) -> "Run":
        return cls(
            id=db_model.id,
            kind=db_model.kind,
            schema=db_model.schema,
            config=db_model.config,
            summary=db_model.summary,
            passed=db_model.passed,
            created_at=db_model.created_at,
        )


@dataclass
class Row:
    id: str
    run_id: str
    position: int
    content: Dict[str, Any]

    @classmethod
    def from_db(cls, db_model: RowModel) -> "Row":
        return cls(
            id=db_model.id,
            run_id=db_model.run_id,
            position=db_model.position,
            content=db_model.content,
        )


class RunArchive:
    """Bench runs and their rows in a SQL database (sqlite by default)"""

    def __init__(self, db_url: Optional[str] = None):
        self.engine = create_engine(
            db_url or get_settings().archive_url,
            connect_args={"check_same_thread": False},
            poolclass=StaticPool,
        )
        Base.metadata.create_all(self.engine)

    def save(self, run: ExperimentRun) -> Run:
        with Session(self.engine) as session:
            db_run = RunModel(
                id=str(uuid.uuid4()),
                kind=run.kind.value,
                schema=schema_tag(run.kind),
                config=run.config.model_dump(mode="json"),
                summary=json.loads(json.dumps(run.summary, default=str)),
                passed=run.passed,
                created_at=datetime.utcnow(),
            )
            session.add(db_run)
            for position, record in enumerate(run.records):
                session.add(
                    RowModel(
                        id=str(uuid.uuid4()),
                        run_id=db_run.id,
                        position=position,
                        content=json.loads(record.model_dump_json()),
                    )
                )
            session.commit()
            return Run.from_db(db_run)

    def list_runs(self, kind: Optional[str] = None) -> List[Run]:
        with Session(self.engine) as session:
            query = session.query(RunModel)
            if kind is not None:
                query = query.filter_by(kind=kind)
            return [Run.from_db(r) for r in query.order_by(RunModel.created_at).all()]

    def get_run(self, run_id: str) -> Run:
        with Session(self.engine) as session:
            db_run = session.query(RunModel).filter_by(id=run_id).first()
            if not db_run:
                raise ValueError(f"Run {run_id} not found")
            return Run.from_db(db_run)

    def get_rows(self, run_id: str) -> List[Row]:
        with Session(self.engine) as session:
            db_run = session.query(RunModel).filter_by(id=run_id).first()
            if not db_run:
                raise ValueError(f"Run {run_id} not found")
            return [Row.from_db(r) for r in db_run.rows]
