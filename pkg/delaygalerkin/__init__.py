from flask import Flask

from delaygalerkin.config import Config
from delaygalerkin.routes.api_routes import api_bp, health_bp


class Setup:
    @staticmethod
    def create_app():
        app = Flask(__name__)
        app.config.from_object(Config)
        # keep run and check fields in schema order
        app.json.sort_keys = False
        app.register_blueprint(api_bp)
        app.register_blueprint(health_bp)
        return app


create_app = Setup.create_app
